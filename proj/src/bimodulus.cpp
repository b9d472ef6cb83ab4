#include "rcto/bimodulus.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "rcto/errors.hpp"

namespace rcto {

namespace {

double element_thickness(const Problem& p)
{
    return p.config.thickness;
}

bool same_stiffness(const GaussMaterial& a, const GaussMaterial& b)
{
    if (a.E1 != b.E1 || a.E2 != b.E2 || a.nu1 != b.nu1) return false;
    return a.E1 == a.E2 || a.theta == b.theta;
}

} // namespace

double tension_modulus(const BimodulusParams& p, double ratio)
{
    return at_ratio_floor(p, ratio) ? p.E_tens : p.E_comp * ratio;
}

double tension_poisson(const BimodulusParams& p, double ratio)
{
    return at_ratio_floor(p, ratio) ? p.nu_tens : p.nu_comp * ratio;
}

bool at_ratio_floor(const BimodulusParams& p, double ratio)
{
    return ratio <= p.ratio_floor * (1.0 + 1e-12);
}

double apply_continuation(const BimodulusParams& p, double ratio)
{
    if (at_ratio_floor(p, ratio)) return p.ratio_floor;
    // index the schedule so repeated steps do not accumulate round-off
    const double steps = std::round((p.ratio_start - ratio) / p.ratio_step);
    const double next = p.ratio_start - (steps + 1.0) * p.ratio_step;
    return next <= p.ratio_floor * (1.0 + 1e-9) ? p.ratio_floor : next;
}

StiffnessAssignment stiff_assignment(const Problem& problem, std::size_t member_count, double ratio)
{
    const auto& b = problem.config.bimodulus;
    StiffnessAssignment a;
    a.ratio = ratio;
    a.gauss.assign(problem.mesh.element_count() * kGaussPoints, GaussMaterial{b.E_comp, b.E_comp, b.nu_comp, 0.0});
    a.member_modulus.assign(member_count, b.truss_E_tens);
    a.member_tension.assign(member_count, 1);
    return a;
}

Analysis analyze(const Problem& problem, const PhysicalDesign& design, const SpreadMap& spread,
                 const StiffnessAssignment& assignment)
{
    const Mesh& mesh = problem.mesh;
    const int ne = mesh.element_count();
    const double t = element_thickness(problem);

    Analysis out;
    out.D.resize(ne);
    out.element_base.resize(ne);
    std::vector<Mat8> scaled(ne);
    for (int e = 0; e < ne; ++e) {
        for (int g = 0; g < kGaussPoints; ++g) {
            const GaussMaterial& m = assignment.gauss[e * kGaussPoints + g];
            out.D[e][g] = constitutive_global(m.E1, m.E2, m.nu1, m.theta).D;
        }
        out.element_base[e] = element_stiffness(std::span<const Mat3, kGaussPoints>(out.D[e]), mesh.element_size, t);
        scaled[e] = design.element_scale[e] * out.element_base[e];
    }

    const auto& members = problem.ground.members;
    std::vector<StiffnessBlock> blocks;
    blocks.reserve(members.size());
    out.members.reserve(members.size());
    for (std::size_t f = 0; f < members.size(); ++f) {
        MemberState m{members[f].node_a, members[f].node_b, members[f].area, assignment.member_modulus[f],
                      design.member_scale[f]};
        const Mat4 K = global_stiffness(m.modulus, m.area * m.scale, design.node_positions[m.node_a],
                                        design.node_positions[m.node_b], problem.config.min_member_length,
                                        static_cast<int>(f));
        blocks.push_back(couple_to_continuum(K, spread.rows[m.node_a], spread.rows[m.node_b]));
        out.members.push_back(m);
    }
    out.system = assemble_and_solve(mesh, scaled, blocks, problem.bc);
    return out;
}

std::vector<GaussPointState> gauss_stresses(const Problem& problem, const Analysis& analysis)
{
    const Mesh& mesh = problem.mesh;
    std::vector<GaussPointState> out;
    out.reserve(mesh.element_count() * kGaussPoints);
    for (int e = 0; e < mesh.element_count(); ++e) {
        const Vec8 ue = gather(analysis.system.d, mesh.element_dofs(e));
        for (const auto& s :
             principal_stresses(ue, std::span<const Mat3, kGaussPoints>(analysis.D[e]), mesh.element_size))
            out.push_back(s);
    }
    return out;
}

Reassignment reassign(const Problem& problem, const PhysicalDesign& design, const SpreadMap& spread,
                      const Analysis& analysis, const StiffnessAssignment& current, double ratio)
{
    const auto& b = problem.config.bimodulus;
    Reassignment out;
    out.assignment.ratio = ratio;
    const double Et = tension_modulus(b, ratio);
    const double nut = tension_poisson(b, ratio);

    const auto stresses = gauss_stresses(problem, analysis);
    out.assignment.gauss.resize(stresses.size());
    bool unchanged = true;
    for (std::size_t k = 0; k < stresses.size(); ++k) {
        const GaussPointState& s = stresses[k];
        GaussMaterial m;
        m.tension1 = s.s1 >= 0.0;
        m.tension2 = s.s2 >= 0.0;
        m.E1 = m.tension1 ? Et : b.E_comp;
        m.E2 = m.tension2 ? Et : b.E_comp;
        m.nu1 = m.tension1 ? nut : b.nu_comp;
        m.theta = s.theta;
        const GaussMaterial& old = current.gauss[k];
        out.switched += (m.tension1 != old.tension1) + (m.tension2 != old.tension2);
        out.tension_violations += old.tension1 && !m.tension1;
        unchanged = unchanged && same_stiffness(m, old);
        out.assignment.gauss[k] = m;
    }

    const std::size_t nm = analysis.members.size();
    out.assignment.member_modulus.resize(nm);
    out.assignment.member_tension.resize(nm);
    for (std::size_t f = 0; f < nm; ++f) {
        const MemberState& m = analysis.members[f];
        const Vec2& pa = design.node_positions[m.node_a];
        const Vec2& pb = design.node_positions[m.node_b];
        const Vec4 u = interpolate_endpoints(spread.rows[m.node_a], spread.rows[m.node_b], analysis.system.d);
        const bool tension = member_elongation(pa, pb, u) >= 0.0;
        out.assignment.member_tension[f] = tension;
        out.assignment.member_modulus[f] = tension ? b.truss_E_tens : b.truss_E_comp;
        out.switched += tension != static_cast<bool>(current.member_tension[f]);
        unchanged = unchanged && out.assignment.member_modulus[f] == current.member_modulus[f];
    }
    out.unchanged = unchanged;
    return out;
}

InnerLoopResult run_inner_loop(const Problem& problem, const PhysicalDesign& design, const SpreadMap& spread,
                               StiffnessAssignment start, double ratio)
{
    const auto& b = problem.config.bimodulus;
    InnerLoopResult res;
    InnerLoopReport& rep = res.report;

    if (!b.enabled) {
        res.assignment = stiff_assignment(problem, problem.ground.members.size(), ratio);
        res.analysis = analyze(problem, design, spread, res.assignment);
        rep.iterations = 1;
        rep.trace.push_back(res.analysis.system.compliance);
        rep.switched.push_back(0);
        rep.ratios.push_back(ratio);
        rep.converged = true;
        rep.final_ratio = ratio;
        return res;
    }

    // moduli of the warm start follow the requested ratio
    StiffnessAssignment current = std::move(start);
    if (current.ratio != ratio) {
        const double Et = tension_modulus(b, ratio), nut = tension_poisson(b, ratio);
        for (auto& g : current.gauss) {
            g.E1 = g.tension1 ? Et : b.E_comp;
            g.E2 = g.tension2 ? Et : b.E_comp;
            g.nu1 = g.tension1 ? nut : b.nu_comp;
        }
        current.ratio = ratio;
    }

    int at_this_ratio = 0;
    while (true) {
        Analysis analysis = analyze(problem, design, spread, current);
        const double c = analysis.system.compliance;
        ++rep.iterations;
        ++at_this_ratio;
        rep.trace.push_back(c);
        rep.ratios.push_back(ratio);

        Reassignment next = reassign(problem, design, spread, analysis, current, ratio);
        rep.switched.push_back(next.switched);

        const std::size_t n = rep.trace.size();
        const bool small_change = at_this_ratio > 1 && next.tension_violations == 0 &&
                                  std::abs(c - rep.trace[n - 2]) <= b.tol * std::abs(rep.trace[n - 2]);
        if (next.unchanged || small_change) {
            rep.converged = true;
            rep.final_ratio = ratio;
            res.analysis = std::move(analysis);
            res.assignment = std::move(current);
            return res;
        }

        const bool cycling = at_this_ratio > 2 && std::abs(c - rep.trace[n - 3]) <= 1e-6 * std::abs(c);
        if (at_this_ratio >= b.max_iters || (cycling && !at_ratio_floor(b, ratio))) {
            if (at_ratio_floor(b, ratio)) {
                throw NonConvergenceError("bimodulus loop did not converge within " + std::to_string(b.max_iters) +
                                              " iterations at the ratio floor",
                                          rep.trace);
            }
            ratio = apply_continuation(b, ratio);
            at_this_ratio = 0;
            const double Et = tension_modulus(b, ratio), nut = tension_poisson(b, ratio);
            for (auto& g : next.assignment.gauss) {
                g.E1 = g.tension1 ? Et : b.E_comp;
                g.E2 = g.tension2 ? Et : b.E_comp;
                g.nu1 = g.tension1 ? nut : b.nu_comp;
            }
            next.assignment.ratio = ratio;
        }
        current = std::move(next.assignment);
    }
}

void write_inner_trace(std::ostream& out, int outer_iteration, const InnerLoopReport& report)
{
    char buf[128];
    for (std::size_t k = 0; k < report.trace.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%d,%.17g\n", outer_iteration, k + 1, report.trace[k],
                      report.switched[k], report.ratios[k]);
        out << buf;
    }
}

} // namespace rcto
