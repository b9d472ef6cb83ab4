#include "rcto/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rcto/errors.hpp"

namespace rcto {

double simp_stiffness_scale(double rho, double p, double floor)
{
    return floor + std::pow(rho, p) * (1.0 - floor);
}

double simp_stiffness_derivative(double rho, double p, double floor)
{
    return p * std::pow(rho, p - 1.0) * (1.0 - floor);
}

double vts_thickness_penalty(double x, double m, double c)
{
    return x / (1.0 + std::exp((m - x) * c));
}

double vts_thickness_derivative(double x, double m, double c)
{
    const double E = std::exp((m - x) * c);
    if (!std::isfinite(E)) return 0.0;
    const double den = 1.0 + E;
    return 1.0 / den + x * c * E / (den * den);
}

Penalization::Penalization(const RunConfig& config)
    : mode_(config.mode), p_(config.simp_penalty), floor_(config.density_floor), m_(config.vts.m), c_(config.vts.c)
{
}

double Penalization::element(double rho) const
{
    if (mode_ == Mode::Binary) return simp_stiffness_scale(rho, p_, floor_);
    return floor_ + (1.0 - floor_) * vts_thickness_penalty(rho, m_, c_);
}

double Penalization::element_derivative(double rho) const
{
    if (mode_ == Mode::Binary) return simp_stiffness_derivative(rho, p_, floor_);
    return (1.0 - floor_) * vts_thickness_derivative(rho, m_, c_);
}

double Penalization::member(double x) const
{
    return mode_ == Mode::Binary ? x : vts_thickness_penalty(x, m_, c_);
}

double Penalization::member_derivative(double x) const
{
    return mode_ == Mode::Binary ? 1.0 : vts_thickness_derivative(x, m_, c_);
}

std::vector<MovableAxis> movable_axes(const GroundStructure& ground)
{
    std::vector<MovableAxis> out;
    for (std::size_t n = 0; n < ground.nodes.size(); ++n) {
        const NodeBounds& b = ground.bounds[n];
        if (b.x_max > b.x_min) out.push_back({static_cast<int>(n), 0, b.x_min, b.x_max});
        if (b.y_max > b.y_min) out.push_back({static_cast<int>(n), 1, b.y_min, b.y_max});
    }
    return out;
}

std::vector<Vec2> node_positions(const GroundStructure& ground, std::span<const MovableAxis> axes,
                                 std::span<const double> s_p)
{
    std::vector<Vec2> p = ground.nodes;
    for (std::size_t k = 0; k < axes.size(); ++k) {
        const MovableAxis& a = axes[k];
        p[a.node][a.axis] += a.lo + s_p[k] * (a.hi - a.lo);
    }
    return p;
}

VtsThicknessField interpret_vts(std::span<const double> rho, double t_max, double m, double c,
                                double report_threshold)
{
    VtsThicknessField f;
    f.t_max = t_max;
    f.m = m;
    f.c = c;
    f.thickness.reserve(rho.size());
    f.sub_minimum.reserve(rho.size());
    for (double r : rho) {
        f.thickness.push_back(r * t_max);
        f.sub_minimum.push_back(r < report_threshold);
    }
    return f;
}

double non_discreteness(std::span<const double> rho)
{
    if (rho.empty()) return 0.0;
    double s = 0.0;
    for (double r : rho) s += 4.0 * r * (1.0 - r);
    return s / static_cast<double>(rho.size());
}

namespace {

double member_length(const std::vector<Vec2>& pos, const TrussMemberSpec& m)
{
    return (pos[m.node_b] - pos[m.node_a]).norm();
}

bool has_steel(const Problem& p)
{
    return !p.ground.empty() && p.config.steel_max > 0.0;
}

} // namespace

DesignVector initial_design(const Problem& problem, std::span<const MovableAxis> axes)
{
    DesignVector d;
    d.mode = problem.config.mode;
    const double envelope = total_envelope_volume(problem.mesh, problem.config.thickness);
    const double xc = problem.config.optimizer.initial_density.value_or(problem.config.concrete_max / envelope);
    d.x_c.assign(problem.mesh.element_count(), std::clamp(xc, 0.0, 1.0));

    if (!problem.ground.empty()) {
        double total = 0.0;
        for (const auto& m : problem.ground.members)
            total += m.area * (problem.ground.nodes[m.node_b] - problem.ground.nodes[m.node_a]).norm();
        const double xt = has_steel(problem) ? std::min(1.0, problem.config.steel_max / total) : 1.0;
        d.x_t.assign(problem.ground.members.size(), xt);
    }
    for (const auto& a : axes) d.s_p.push_back((0.0 - a.lo) / (a.hi - a.lo));
    return d;
}

Optimizer::Optimizer(Problem problem)
    : problem_(std::move(problem)),
      filter_(problem_.mesh, problem_.config.filter_radius,
              problem_.config.mode == Mode::Binary && problem_.config.heaviside.enabled),
      penalization_(problem_.config)
{
    // the objective is re-linearized about a new material state and beta
    // every iteration, so gradient differences carry no curvature
    mma_settings_.secant_curvature = false;
    axes_ = movable_axes(problem_.ground);
    design_ = initial_design(problem_, axes_);
    ratio_ = problem_.config.bimodulus.enabled ? problem_.config.bimodulus.ratio_start : 1.0;
    assignment_ = stiff_assignment(problem_, problem_.ground.members.size(), ratio_);
    splits_done_ = problem_.config.mode != Mode::Vts || problem_.ground.empty();
    set_design(design_);
    repair_volumes(design_);
}

double Optimizer::beta() const
{
    if (!filter_.projection()) return 0.0;
    return problem_.config.heaviside.beta_schedule[beta_index_];
}

void Optimizer::set_design(DesignVector design)
{
    if (design.x_c.size() != static_cast<std::size_t>(problem_.mesh.element_count()) ||
        design.x_t.size() != problem_.ground.members.size() || design.s_p.size() != axes_.size())
        throw Error("config", "design vector does not match the problem dimensions");
    design_ = std::move(design);
    const auto& o = problem_.config.optimizer;
    mma_ = make_mma_state(static_cast<Eigen::Index>(design_.size()), o.move_continuum);
    Eigen::Index k = static_cast<Eigen::Index>(design_.x_c.size());
    for (std::size_t f = 0; f < design_.x_t.size(); ++f) mma_.move[k++] = o.move_truss;
    for (std::size_t a = 0; a < design_.s_p.size(); ++a) mma_.move[k++] = o.move_nodes;
}

double Optimizer::concrete_volume(const std::vector<double>& x_c)
{
    const auto& rho = filter_.forward(x_c, beta());
    const double v = problem_.mesh.element_size * problem_.mesh.element_size * problem_.config.thickness;
    double s = 0.0;
    for (double r : rho) s += r * v;
    return s;
}

double Optimizer::steel_volume(const DesignVector& design) const
{
    const auto pos = node_positions(problem_.ground, axes_, design.s_p);
    double s = 0.0;
    for (std::size_t f = 0; f < problem_.ground.members.size(); ++f) {
        const auto& m = problem_.ground.members[f];
        s += design.x_t[f] * m.area * member_length(pos, m);
    }
    return s;
}

void Optimizer::repair_volumes(DesignVector& design)
{
    const double vmax = problem_.config.concrete_max;
    if (concrete_volume(design.x_c) > vmax) {
        // uniform downward shift, found by bisection; volume is monotone in it
        const std::vector<double> x0 = design.x_c;
        auto shifted = [&](double eta) {
            std::vector<double> x(x0.size());
            for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::clamp(x0[k] - eta, 0.0, 1.0);
            return x;
        };
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
            const double mid = 0.5 * (lo + hi);
            (concrete_volume(shifted(mid)) > vmax ? lo : hi) = mid;
        }
        design.x_c = shifted(hi);
    }
    if (has_steel(problem_)) {
        const double smax = problem_.config.steel_max;
        for (int guard = 0; guard < 8; ++guard) {
            const double vt = steel_volume(design);
            if (vt <= smax) break;
            const double f = smax / vt * (1.0 - 1e-14);
            for (double& x : design.x_t) x *= f;
        }
    }
    filter_.invalidate();
}

Evaluation Optimizer::evaluate(const DesignVector& design, const StiffnessAssignment* frozen)
{
    const Mesh& mesh = problem_.mesh;
    Evaluation ev;
    ev.density = filter_.forward(design.x_c, beta());
    ev.positions = node_positions(problem_.ground, axes_, design.s_p);

    SpreadMap spread;
    if (!problem_.ground.empty()) spread = build_spread_map(mesh, ev.positions, problem_.config.ssm_radius);

    PhysicalDesign pd;
    pd.element_scale.resize(ev.density.size());
    for (std::size_t e = 0; e < ev.density.size(); ++e) pd.element_scale[e] = penalization_.element(ev.density[e]);
    pd.member_scale.resize(design.x_t.size());
    for (std::size_t f = 0; f < design.x_t.size(); ++f) pd.member_scale[f] = penalization_.member(design.x_t[f]);
    pd.node_positions = ev.positions;

    if (frozen) {
        ev.inner.analysis = analyze(problem_, pd, spread, *frozen);
        ev.inner.assignment = *frozen;
        ev.inner.report.iterations = 1;
        ev.inner.report.trace = {ev.inner.analysis.system.compliance};
        ev.inner.report.switched = {0};
        ev.inner.report.ratios = {frozen->ratio};
        ev.inner.report.converged = true;
        ev.inner.report.final_ratio = frozen->ratio;
    } else {
        ev.inner = run_inner_loop(problem_, pd, spread, assignment_, ratio_);
    }
    const Analysis& an = ev.inner.analysis;
    const Eigen::VectorXd& d = an.system.d;
    ev.compliance = an.system.compliance;

    std::vector<double> dc_drho(ev.density.size());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const Vec8 ue = gather(d, mesh.element_dofs(e));
        dc_drho[e] = -penalization_.element_derivative(ev.density[e]) * ue.dot(an.element_base[e] * ue);
    }
    ev.dc_xc = filter_.backprop(dc_drho);

    const double v = mesh.element_size * mesh.element_size * problem_.config.thickness;
    for (double r : ev.density) ev.concrete_volume += r * v;
    ev.dvc_xc = filter_.backprop(std::vector<double>(ev.density.size(), v));

    const auto& members = problem_.ground.members;
    ev.dc_xt.resize(members.size());
    ev.dvt_xt.resize(members.size());
    ev.dc_sp.assign(axes_.size(), 0.0);
    ev.dvt_sp.assign(axes_.size(), 0.0);
    if (!members.empty()) {
        std::vector<double> dvt_pos(2 * ev.positions.size(), 0.0);
        for (std::size_t f = 0; f < members.size(); ++f) {
            ev.dc_xt[f] = sizing_sensitivity(an.members[f], ev.positions, spread, d,
                                             penalization_.member_derivative(design.x_t[f]));
            const Vec2 dir = ev.positions[members[f].node_b] - ev.positions[members[f].node_a];
            const double L = dir.norm();
            ev.steel_volume += design.x_t[f] * members[f].area * L;
            ev.dvt_xt[f] = members[f].area * L;
            const Vec2 dL = dir / L;
            for (int ax = 0; ax < 2; ++ax) {
                dvt_pos[2 * members[f].node_a + ax] -= design.x_t[f] * members[f].area * dL[ax];
                dvt_pos[2 * members[f].node_b + ax] += design.x_t[f] * members[f].area * dL[ax];
            }
        }
        const auto dc_pos = node_position_sensitivity(an.members, ev.positions, spread, d);
        for (std::size_t k = 0; k < axes_.size(); ++k) {
            const int idx = 2 * axes_[k].node + axes_[k].axis;
            const double span = axes_[k].hi - axes_[k].lo;
            ev.dc_sp[k] = dc_pos[idx] * span;
            ev.dvt_sp[k] = dvt_pos[idx] * span;
        }
    }
    return ev;
}

bool Optimizer::schedules_done() const
{
    const bool ratio_done = !problem_.config.bimodulus.enabled || at_ratio_floor(problem_.config.bimodulus, ratio_);
    const bool beta_done = !filter_.projection() || beta_index_ + 1 >= problem_.config.heaviside.beta_schedule.size();
    return ratio_done && beta_done && splits_done_;
}

void Optimizer::maybe_split()
{
    const auto& vts = problem_.config.vts;
    const auto pos = node_positions(problem_.ground, axes_, design_.s_p);
    SplitResult r = split_members(problem_.ground, pos, design_.x_t, vts.split_max_length,
                                  problem_.config.min_member_length, vts.anisotropy);
    since_split_ = 0;
    if (r.split_count == 0) {
        splits_done_ = true;
        return;
    }
    split_total_ += r.split_count;
    problem_.ground = std::move(r.ground);
    axes_ = movable_axes(problem_.ground);
    DesignVector next;
    next.mode = design_.mode;
    next.x_c = design_.x_c;
    next.x_t = std::move(r.sizing);
    for (const auto& a : axes_) next.s_p.push_back((0.0 - a.lo) / (a.hi - a.lo));
    set_design(std::move(next));
    const auto& b = problem_.config.bimodulus;
    assignment_.member_modulus.assign(problem_.ground.members.size(), b.truss_E_tens);
    assignment_.member_tension.assign(problem_.ground.members.size(), 1);
    repair_volumes(design_);
}

const IterationRecord& Optimizer::step()
{
    const auto& cfg = problem_.config;
    Evaluation ev = evaluate(design_);
    assignment_ = ev.inner.assignment;
    const double used_ratio = ev.inner.report.final_ratio;
    ratio_ = used_ratio;
    if (c0_ == 0.0) c0_ = ev.compliance > 0.0 ? ev.compliance : 1.0;

    const Eigen::Index nc = static_cast<Eigen::Index>(design_.x_c.size());
    const Eigen::Index nt = static_cast<Eigen::Index>(design_.x_t.size());
    const Eigen::Index np = static_cast<Eigen::Index>(design_.s_p.size());
    const Eigen::Index n = nc + nt + np;
    const bool steel = has_steel(problem_);
    const Eigen::Index m = steel ? 2 : 1;

    MmaInput in;
    in.x.resize(n);
    in.xmin = Eigen::VectorXd::Zero(n);
    in.xmax = Eigen::VectorXd::Ones(n);
    in.df0.resize(n);
    in.g.resize(m);
    in.dg = Eigen::MatrixXd::Zero(m, n);
    in.f0 = ev.compliance / c0_;
    for (Eigen::Index k = 0; k < nc; ++k) {
        in.x[k] = design_.x_c[k];
        in.df0[k] = ev.dc_xc[k] / c0_;
        in.dg(0, k) = ev.dvc_xc[k] / cfg.concrete_max;
    }
    for (Eigen::Index k = 0; k < nt; ++k) {
        in.x[nc + k] = design_.x_t[k];
        in.df0[nc + k] = ev.dc_xt[k] / c0_;
        if (steel) in.dg(1, nc + k) = ev.dvt_xt[k] / cfg.steel_max;
    }
    for (Eigen::Index k = 0; k < np; ++k) {
        in.x[nc + nt + k] = design_.s_p[k];
        in.df0[nc + nt + k] = ev.dc_sp[k] / c0_;
        if (steel) in.dg(1, nc + nt + k) = ev.dvt_sp[k] / cfg.steel_max;
    }
    in.g[0] = ev.concrete_volume / cfg.concrete_max - 1.0;
    if (steel) in.g[1] = ev.steel_volume / cfg.steel_max - 1.0;

    const SubproblemResult sub = mma_step(in, mma_, mma_settings_);

    DesignVector next = design_;
    for (Eigen::Index k = 0; k < nc; ++k) next.x_c[k] = sub.x[k];
    for (Eigen::Index k = 0; k < nt; ++k) next.x_t[k] = sub.x[nc + k];
    for (Eigen::Index k = 0; k < np; ++k) next.s_p[k] = sub.x[nc + nt + k];
    repair_volumes(next);

    double change = 0.0;
    for (Eigen::Index k = 0; k < nc; ++k) change = std::max(change, std::abs(next.x_c[k] - design_.x_c[k]));
    for (Eigen::Index k = 0; k < nt; ++k) change = std::max(change, std::abs(next.x_t[k] - design_.x_t[k]));
    for (Eigen::Index k = 0; k < np; ++k) change = std::max(change, std::abs(next.s_p[k] - design_.s_p[k]));
    design_ = std::move(next);
    last_change_ = change;

    IterationRecord rec;
    rec.iteration = static_cast<int>(history_.size()) + 1;
    rec.compliance = ev.compliance;
    rec.concrete_fraction = ev.concrete_volume / cfg.concrete_max;
    rec.steel_fraction = steel ? ev.steel_volume / cfg.steel_max : 0.0;
    rec.max_change = change;
    rec.inner_iterations = ev.inner.report.iterations;
    rec.ratio = used_ratio;
    rec.beta = beta();
    rec.split_count = split_total_;
    rec.kkt = kkt_residual(in.x, sub.lambda, in.df0, in.g, in.dg, in.xmin, in.xmax);
    history_.push_back(rec);
    inner_reports_.push_back(ev.inner.report);

    const bool converged = schedules_done() && change < cfg.optimizer.tol;

    // schedules advance after the iteration that used them
    if (cfg.bimodulus.enabled) ratio_ = apply_continuation(cfg.bimodulus, ratio_);
    if (filter_.projection()) {
        ++at_beta_;
        const auto& sched = cfg.heaviside.beta_schedule;
        if (beta_index_ + 1 < sched.size() && (at_beta_ >= cfg.heaviside.interval || change < cfg.optimizer.tol)) {
            ++beta_index_;
            at_beta_ = 0;
            mma_.reset();
            repair_volumes(design_);
        }
    }
    if (!splits_done_ && ++since_split_ >= cfg.vts.split_interval) maybe_split();

    finished_ = converged || static_cast<int>(history_.size()) >= cfg.optimizer.max_iters;
    converged_ = converged;
    return history_.back();
}

RunResult Optimizer::run(const std::function<void(const IterationRecord&)>& progress)
{
    while (!finished_) {
        const IterationRecord& rec = step();
        if (progress) progress(rec);
    }
    RunResult r;
    r.problem = problem_;
    r.design = design_;
    r.density = filter_.forward(design_.x_c, beta());
    r.positions = node_positions(problem_.ground, axes_, design_.s_p);
    r.history = history_;
    r.inner_reports = inner_reports_;
    if (problem_.config.mode == Mode::Vts) {
        const auto& v = problem_.config.vts;
        r.thickness = interpret_vts(r.density, problem_.config.thickness, v.m, v.c, v.report_threshold);
    }
    r.converged = converged_;
    return r;
}

GradientReport check_gradients(const Problem& problem, std::span<const double> steps)
{
    static const std::vector<double> default_steps{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10};
    if (steps.empty()) steps = default_steps;

    Optimizer opt(problem);
    DesignVector z = opt.design();
    for (std::size_t k = 0; k < z.x_c.size(); ++k)
        z.x_c[k] = std::clamp(z.x_c[k] + 0.3 * std::sin(1.7 * double(k) + 0.3), 0.05, 0.95);
    for (std::size_t k = 0; k < z.x_t.size(); ++k) z.x_t[k] = 0.3 + 0.5 * std::abs(std::sin(0.9 * double(k) + 0.5));
    for (std::size_t k = 0; k < z.s_p.size(); ++k)
        z.s_p[k] = std::clamp(z.s_p[k] + 0.2 * std::sin(2.3 * double(k) + 1.1), 0.05, 0.95);

    const StiffnessAssignment frozen = opt.evaluate(z).inner.assignment;
    const Evaluation base = opt.evaluate(z, &frozen);

    GradientReport report;
    auto family = [&](const std::string& name, std::vector<double> DesignVector::*field,
                      const std::vector<double>& analytic) {
        GradientFamily fam;
        fam.name = name;
        fam.count = static_cast<int>(analytic.size());
        fam.max_rel_error = analytic.empty() ? 0.0 : std::numeric_limits<double>::infinity();
        if (analytic.empty()) {
            report.families.push_back(fam);
            return;
        }
        double scale = 0.0;
        for (double a : analytic) scale = std::max(scale, std::abs(a));
        const double floor = std::max(1e-3 * scale, std::numeric_limits<double>::min());
        for (double h : steps) {
            double worst = 0.0;
            for (std::size_t j = 0; j < analytic.size(); ++j) {
                DesignVector zp = z, zm = z;
                (zp.*field)[j] += h;
                (zm.*field)[j] -= h;
                const double fd =
                    (opt.evaluate(zp, &frozen).compliance - opt.evaluate(zm, &frozen).compliance) / (2.0 * h);
                worst = std::max(worst, std::abs(analytic[j] - fd) / std::max(std::abs(analytic[j]), floor));
            }
            fam.sweep.emplace_back(h, worst);
            if (worst < fam.max_rel_error) {
                fam.max_rel_error = worst;
                fam.best_step = h;
            }
        }
        report.families.push_back(fam);
    };
    family("x_c", &DesignVector::x_c, base.dc_xc);
    family("x_t", &DesignVector::x_t, base.dc_xt);
    family("x_p", &DesignVector::s_p, base.dc_sp);
    return report;
}

} // namespace rcto
