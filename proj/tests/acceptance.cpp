// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rcto/aci.hpp"
#include "rcto/bimodulus.hpp"
#include "rcto/errors.hpp"
#include "rcto/fea.hpp"
#include "rcto/io.hpp"
#include "rcto/optimizer.hpp"
#include "rcto/truss.hpp"

using namespace rcto;
namespace fs = std::filesystem;

namespace {

std::string config(const std::string& name)
{
    return std::string(RCTO_CONFIG_DIR) + "/" + name;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Verdict
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1 -------------------------------------------------------------------------

Verdict gradients()
{
    const auto t0 = std::chrono::steady_clock::now();
    const GradientReport rep = check_gradients(load_problem(config("tiny.cfg")));
    const double t = seconds_since(t0);
    bool ok = rep.families.size() == 3 && t < 30.0;
    std::string d;
    for (const auto& f : rep.families) {
        const bool v_shape = f.sweep.size() >= 5 && f.sweep.front().second > 10 * f.max_rel_error &&
                             f.sweep.back().second > 10 * f.max_rel_error;
        ok = ok && f.max_rel_error < 1e-4 && v_shape;
        d += fmt("%s %.1e%s, ", f.name.c_str(), f.max_rel_error, v_shape ? "" : " (no V)");
    }
    return {ok, d + fmt("limit 1e-4, %.2f s (< 30 s)", t)};
}

// 2 -------------------------------------------------------------------------

Verdict ssm_exactness()
{
    const Mesh mesh{16, 6, 0.762, Vec2(0.3, -0.1)};
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> ux(0.3, 0.3 + mesh.width()), uy(-0.1, -0.1 + mesh.height());
    std::uniform_real_distribution<double> ur(0.75, 3.0), ud(-1.0, 1.0);

    double pou = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const SpreadRow row = spread_weights(Vec2(ux(gen), uy(gen)), mesh, ur(gen) * mesh.element_size);
        double s = 0.0;
        for (double w : row.weights) s += w;
        pou = std::max(pou, std::abs(s - 1.0));
    }

    // coincident nodes with r below one edge against direct shared-node assembly
    const std::vector<int> on{mesh.node_id(2, 0), mesh.node_id(9, 1), mesh.node_id(14, 0), mesh.node_id(7, 6)};
    std::vector<Vec2> pos;
    for (int n : on) pos.push_back(mesh.node_coords(n));
    const std::vector<std::pair<int, int>> bars{{0, 1}, {1, 2}, {0, 3}, {3, 2}, {1, 3}};
    const std::vector<Mat8> elements(mesh.element_count(),
                                     element_stiffness(isotropic_plane_stress(180.0, 0.3), mesh.element_size, 7.5));
    const SpreadMap spread = build_spread_map(mesh, pos, 0.5 * mesh.element_size);
    std::vector<StiffnessBlock> coupled, shared;
    for (auto [a, b] : bars) {
        const Mat4 K = global_stiffness(5800.0, 1.3, pos[a], pos[b]);
        coupled.push_back(couple_to_continuum(K, spread.rows[a], spread.rows[b]));
        shared.push_back({{2 * on[a], 2 * on[a] + 1, 2 * on[b], 2 * on[b] + 1}, Eigen::MatrixXd(K)});
    }
    const Eigen::SparseMatrix<double> Kc = assemble(mesh, elements, coupled), Ks = assemble(mesh, elements, shared);
    const Eigen::SparseMatrix<double> diff = Kc - Ks;
    double worst = 0.0, scale = 0.0;
    for (int k = 0; k < Ks.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Ks, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    for (int k = 0; k < diff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    const double coincident = worst / scale;

    // energy identity for random fields and off-grid endpoints
    double energy = 0.0;
    for (int k = 0; k < 300; ++k) {
        const Vec2 a(ux(gen), uy(gen)), b(ux(gen), uy(gen));
        if ((a - b).norm() < 0.5) continue;
        const double r = ur(gen) * mesh.element_size;
        const SpreadRow ra = spread_weights(a, mesh, r), rb = spread_weights(b, mesh, r);
        const Mat4 K = global_stiffness(5800.0, 1.3, a, b);
        const StiffnessBlock blk = couple_to_continuum(K, ra, rb);
        Eigen::VectorXd d(mesh.dof_count());
        for (int i = 0; i < d.size(); ++i) d[i] = ud(gen);
        Eigen::VectorXd loc(blk.dofs.size());
        for (std::size_t i = 0; i < blk.dofs.size(); ++i) loc[i] = d[blk.dofs[i]];
        const Vec4 ut = interpolate_endpoints(ra, rb, d);
        const double bar = ut.dot(K * ut);
        energy = std::max(energy, std::abs(loc.dot(blk.k * loc) - bar) / std::max(std::abs(bar), 1e-300));
    }
    const bool ok = pou <= 1e-12 && coincident <= 1e-14 && energy <= 1e-10;
    return {ok, fmt("partition %.1e (<= 1e-12), coincident %.1e rel (<= 1e-14), energy %.1e rel (<= 1e-10)", pou,
                    coincident, energy)};
}

// 3 -------------------------------------------------------------------------

Verdict bimodulus_fixed_point()
{
    const Problem p = load_problem(config("beam.cfg"));
    PhysicalDesign d;
    d.element_scale.assign(p.mesh.element_count(), 1.0);
    d.member_scale.assign(p.ground.members.size(), 0.5);
    d.node_positions = p.ground.nodes;
    const SpreadMap spread = build_spread_map(p.mesh, d.node_positions, p.config.ssm_radius);
    const double floor = p.config.bimodulus.ratio_floor;
    const InnerLoopResult res =
        run_inner_loop(p, d, spread, stiff_assignment(p, p.ground.members.size(), floor), floor);
    const auto st = gauss_stresses(p, res.analysis);
    int labeled = 0, violations = 0;
    for (std::size_t k = 0; k < st.size(); ++k) {
        if (!res.assignment.gauss[k].tension1) continue;
        ++labeled;
        violations += st[k].s1 < 0.0;
    }

    // ratio overridden to one on the bare continuum against a plain solve
    Problem bare = p;
    bare.ground = GroundStructure{};
    PhysicalDesign bd;
    for (int e = 0; e < p.mesh.element_count(); ++e) bd.element_scale.push_back(0.1 + 0.9 * ((e * 13) % 17) / 16.0);
    const InnerLoopResult one = run_inner_loop(bare, bd, SpreadMap{}, stiff_assignment(bare, 0, 1.0), 1.0);
    const Mat8 base = element_stiffness(isotropic_plane_stress(180.0, 0.3), p.mesh.element_size, p.config.thickness);
    std::vector<Mat8> scaled;
    for (double s : bd.element_scale) scaled.push_back(s * base);
    const GlobalSystem plain = assemble_and_solve(bare.mesh, scaled, {}, bare.bc);
    const bool bitwise = one.analysis.system.compliance == plain.compliance && one.analysis.system.d == plain.d;

    const bool ok = res.report.converged && res.report.iterations <= 50 && violations == 0 && labeled > 0 && bitwise;
    return {ok, fmt("%d iterations at ratio %.3f (<= 50), %d of %d tension-labeled points with s1 < 0, ratio 1 %s",
                    res.report.iterations, res.report.final_ratio, violations, labeled,
                    bitwise ? "bit-identical to plain FEA" : "differs from plain FEA")};
}

// 4 -------------------------------------------------------------------------

Verdict mma_regression()
{
    const Problem p = load_problem(config("mbb.cfg"));
    auto t0 = std::chrono::steady_clock::now();
    Optimizer opt(p);
    const RunResult r = opt.run();
    const double c_mma = opt.evaluate(r.design).compliance;
    const double t_mma = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const auto oc = oracle::mbb_optimality_criteria(p.mesh.nx, p.mesh.ny, 0.5, p.config.filter_radius,
                                                    p.config.bimodulus.E_comp, p.config.bimodulus.nu_comp);
    const double t_oc = seconds_since(t0);
    const double gap = (c_mma - oc.compliance) / oc.compliance;
    const bool ok = std::abs(gap) <= 0.02 && t_mma < 60.0 && t_oc < 60.0;
    return {ok, fmt("MMA %.5f (%zu it, %.1f s), OC %.5f (%d it, %.1f s), gap %+.2f%% (|gap| <= 2%%)", c_mma,
                    r.history.size(), t_mma, oc.compliance, oc.iterations, t_oc, 100 * gap)};
}

// 5 -------------------------------------------------------------------------

Verdict thickness_penalty()
{
    bool half = true, monotone = true, saturated = true;
    double worst_top = 1.0;
    for (int mi = 1; mi < 100; ++mi) {
        const double m = mi / 100.0;
        for (double c : {0.1, 1.0, 5.0, 10.0, 20.0, 35.0, 50.0, 100.0, 150.0, 200.0}) {
            half = half && vts_thickness_penalty(m, m, c) == m / 2;
            double prev = vts_thickness_penalty(0.0, m, c);
            for (int k = 1; k <= 10000; ++k) {
                const double y = vts_thickness_penalty(k / 10000.0, m, c);
                monotone = monotone && y >= prev;
                prev = y;
            }
            if (c >= 20.0 && m <= 0.5) {
                const double top = vts_thickness_penalty(1.0, m, c);
                worst_top = std::min(worst_top, top);
                saturated = saturated && top >= 0.999;
            }
        }
    }
    return {half && monotone && saturated,
            fmt("y(m) = m/2 %s, monotone %s over m in (0,1), c in (0,200], min y(1) = %.6f (>= 0.999)",
                half ? "exact" : "FAILS", monotone ? "yes" : "NO", worst_top)};
}

// 6 and 8 share one specimen-scale run -----------------------------------------

struct SpecimenRun
{
    Problem problem;
    RunResult result;
    Evaluation final_eval;
    double seconds = 0.0;
};

SpecimenRun specimen_run()
{
    SpecimenRun pr;
    pr.problem = load_problem(config("specimen_binary.cfg"));
    const auto t0 = std::chrono::steady_clock::now();
    Optimizer opt(pr.problem);
    pr.result = opt.run();
    pr.final_eval = opt.evaluate(pr.result.design);
    pr.seconds = seconds_since(t0);
    return pr;
}

Verdict volume_feasibility(const SpecimenRun& pr)
{
    const auto& cfg = pr.problem.config;
    double worst_c = 0.0, worst_s = 0.0;
    for (const auto& h : pr.result.history) {
        worst_c = std::max(worst_c, h.concrete_fraction - 1.0);
        worst_s = std::max(worst_s, h.steel_fraction - 1.0);
    }
    // the final iterate, recomputed from its physical fields
    const Mesh& mesh = pr.problem.mesh;
    double vc = 0.0;
    for (double r : pr.result.density) vc += r * mesh.element_size * mesh.element_size * cfg.thickness;
    double vs = 0.0;
    const auto& members = pr.result.problem.ground.members;
    for (std::size_t f = 0; f < members.size(); ++f)
        vs += pr.result.design.x_t[f] * members[f].area *
              (pr.result.positions[members[f].node_b] - pr.result.positions[members[f].node_a]).norm();
    worst_c = std::max(worst_c, vc / cfg.concrete_max - 1.0);
    worst_s = std::max(worst_s, vs / cfg.steel_max - 1.0);
    const double nd = non_discreteness(pr.result.density);
    const bool ok = worst_c <= 1e-6 && worst_s <= 1e-6 && nd <= 0.05;
    return {ok, fmt("%zu iterates, worst concrete excess %.1e, steel excess %.1e (<= 1e-6), non-discreteness %.4f "
                    "(<= 0.05)",
                    pr.result.history.size(), worst_c, worst_s, nd)};
}

Verdict sign_masks(const SpecimenRun& pr)
{
    const Problem& p = pr.problem;
    const Mesh& mesh = p.mesh;

    // plain bending: solid isotropic beam, no steel
    const Mat3 D = isotropic_plane_stress(p.config.bimodulus.E_comp, p.config.bimodulus.nu_comp);
    const std::vector<Mat8> solid(mesh.element_count(), element_stiffness(D, mesh.element_size, p.config.thickness));
    const GlobalSystem plain = assemble_and_solve(mesh, solid, {}, p.bc);
    std::array<Mat3, kGaussPoints> Ds;
    Ds.fill(D);
    std::vector<Eigen::Vector3d> sigma(mesh.element_count());
    for (int e = 0; e < mesh.element_count(); ++e) {
        Eigen::Vector3d s = Eigen::Vector3d::Zero();
        for (const auto& g : principal_stresses(gather(plain.d, mesh.element_dofs(e)), Ds, mesh.element_size))
            s += Eigen::Vector3d(g.sxx, g.syy, g.sxy);
        sigma[e] = s / kGaussPoints;
    }
    auto element_at = [&](const Vec2& q) {
        const Vec2 r = (q - mesh.origin) / mesh.element_size;
        const int i = std::clamp(static_cast<int>(std::floor(r.x())), 0, mesh.nx - 1);
        const int j = std::clamp(static_cast<int>(std::floor(r.y())), 0, mesh.ny - 1);
        return mesh.element_id(i, j);
    };

    int active = 0, misplaced = 0;
    const auto& members = pr.result.problem.ground.members;
    for (std::size_t f = 0; f < members.size(); ++f) {
        if (pr.result.design.x_t[f] <= 0.5) continue;
        ++active;
        const Vec2 a = pr.result.positions[members[f].node_a], b = pr.result.positions[members[f].node_b];
        const Vec2 t = (b - a).normalized();
        bool tensile = true;
        for (int k = 0; k <= 10; ++k) {
            const Eigen::Vector3d& s = sigma[element_at(a + (b - a) * (k / 10.0))];
            tensile = tensile && t.x() * t.x() * s[0] + t.y() * t.y() * s[1] + 2 * t.x() * t.y() * s[2] > 0.0;
        }
        misplaced += !tensile;
    }

    // concrete: compression-dominated principal state under the design's own converged field
    const auto st = gauss_stresses(pr.result.problem, pr.final_eval.inner.analysis);
    int dense = 0, compressive = 0;
    for (int e = 0; e < mesh.element_count(); ++e) {
        if (pr.result.density[e] < 0.5) continue;
        ++dense;
        double sx = 0.0, sy = 0.0, sxy = 0.0;
        for (int g = 0; g < kGaussPoints; ++g) {
            sx += st[e * kGaussPoints + g].sxx;
            sy += st[e * kGaussPoints + g].syy;
            sxy += st[e * kGaussPoints + g].sxy;
        }
        const GaussPointState ps = principal_state(sx / kGaussPoints, sy / kGaussPoints, sxy / kGaussPoints);
        compressive += ps.s2 < 0.0 && std::abs(ps.s2) >= std::abs(ps.s1);
    }
    const double fraction = dense ? static_cast<double>(compressive) / dense : 0.0;
    const bool ok = active > 0 && misplaced == 0 && compressive == dense && pr.seconds < 900.0;
    return {ok, fmt("%s after %zu it, %d active members, %d outside the plain-FEA tension zone; %.1f%% of %d dense "
                    "elements compression-dominated (%d outside, need 0); %.0f s (< 900 s)",
                    pr.result.converged ? "converged" : "iteration cap", pr.result.history.size(), active, misplaced,
                    100 * fraction, dense, dense - compressive, pr.seconds)};
}

// 7 -------------------------------------------------------------------------

Verdict aci_baselines()
{
    const double narrow = three_point_design_load(load_section(config("prismatic_2_25in.sec"))) / 1000.0;
    const double wide = three_point_design_load(load_section(config("prismatic_3in.sec"))) / 1000.0;
    const double e1 = narrow / 13.5 - 1.0, e2 = wide / 19.2 - 1.0;
    return {std::abs(e1) <= 0.05 && std::abs(e2) <= 0.05,
            fmt("5.7 cm: %.2f kN (%+.1f%% vs 13.5), 7.6 cm: %.2f kN (%+.1f%% vs 19.2), limit 5%%", narrow, 100 * e1,
                wide, 100 * e2)};
}

// 9 -------------------------------------------------------------------------

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism()
{
    const fs::path root = fs::temp_directory_path() / "rcto-acceptance-determinism";
    fs::remove_all(root);
    int status = 0;
    for (const char* run : {"a", "b"}) {
        const std::string cmd = std::string("\"") + RCTO_CLI + "\" optimize \"" + config("beam.cfg") + "\" --out \"" +
                                (root / run).string() + "\" --quiet";
        status |= std::system(cmd.c_str());
    }
    int files = 0, different = 0;
    if (status == 0) {
        for (const auto& entry : fs::directory_iterator(root / "a")) {
            ++files;
            const fs::path other = root / "b" / entry.path().filename();
            different += !fs::exists(other) || slurp(entry.path()) != slurp(other);
        }
    }
    fs::remove_all(root);
    return {status == 0 && files > 0 && different == 0,
            status ? "optimize exited with an error" : fmt("%d bundle files, %d differ", files, different)};
}

} // namespace

int main()
{
    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Verdict()>& f) {
        Verdict v;
        try {
            v = f();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("[%s] %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "gradient correctness", gradients);
    report(2, "SSM exactness", ssm_exactness);
    report(3, "bimodulus fixed point", bimodulus_fixed_point);
    report(4, "MMA against optimality criteria", mma_regression);
    report(5, "minimum-thickness penalty", thickness_penalty);

    SpecimenRun pr;
    std::string specimen_error;
    try {
        pr = specimen_run();
    } catch (const std::exception& e) {
        specimen_error = e.what();
    }
    auto specimen = [&](Verdict (*check)(const SpecimenRun&)) {
        return [&, check]() -> Verdict {
            if (!specimen_error.empty()) return {false, "specimen-scale run failed: " + specimen_error};
            return check(pr);
        };
    };
    report(6, "volume feasibility", specimen(volume_feasibility));
    report(7, "ACI baselines", aci_baselines);
    report(8, "end-to-end sign masks", specimen(sign_masks));
    report(9, "determinism", determinism);

    std::printf("%d of 9 criteria passed\n", 9 - failed);
    return failed ? 1 : 0;
}
