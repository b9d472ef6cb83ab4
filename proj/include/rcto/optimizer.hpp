#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcto/bimodulus.hpp"
#include "rcto/domain.hpp"
#include "rcto/filters.hpp"
#include "rcto/mma.hpp"

namespace rcto {

/// floor + rho^p (1 - floor)
double simp_stiffness_scale(double rho, double p, double floor = 1e-9);
double simp_stiffness_derivative(double rho, double p, double floor = 1e-9);

/// x / (1 + exp((m - x) c))
double vts_thickness_penalty(double x, double m, double c);
double vts_thickness_derivative(double x, double m, double c);

/// Stiffness multipliers for continuum elements and truss members. Binary
/// mode uses SIMP on the continuum and linear truss sizing; VTS mode uses
/// the minimum-thickness sigmoid on both.
class Penalization
{
public:
    explicit Penalization(const RunConfig& config);

    Mode mode() const { return mode_; }
    double element(double rho) const;
    double element_derivative(double rho) const;
    double member(double x) const;
    double member_derivative(double x) const;

private:
    Mode mode_;
    double p_, floor_, m_, c_;
};

/// One movable coordinate of a truss node; the scaled variable s in [0, 1]
/// maps to initial + lo + s (hi - lo).
struct MovableAxis
{
    int node = 0;
    int axis = 0;
    double lo = 0.0;
    double hi = 0.0;
};

std::vector<MovableAxis> movable_axes(const GroundStructure& ground);

struct DesignVector
{
    Mode mode = Mode::Binary;
    std::vector<double> x_c;
    std::vector<double> x_t;
    std::vector<double> s_p; // scaled node variables, one per movable axis

    std::size_t size() const { return x_c.size() + x_t.size() + s_p.size(); }
};

std::vector<Vec2> node_positions(const GroundStructure& ground, std::span<const MovableAxis> axes,
                                 std::span<const double> s_p);

struct IterationRecord
{
    int iteration = 0;
    double compliance = 0.0;
    double concrete_fraction = 0.0; // of the concrete budget
    double steel_fraction = 0.0;    // of the steel budget
    double max_change = 0.0;
    int inner_iterations = 0;
    double ratio = 0.0;
    double beta = 0.0;
    int split_count = 0;
    double kkt = 0.0;
};

struct VtsThicknessField
{
    double t_max = 0.0;
    double m = 0.0;
    double c = 0.0;
    std::vector<double> thickness;
    std::vector<char> sub_minimum;
};

VtsThicknessField interpret_vts(std::span<const double> rho, double t_max, double m, double c,
                                double report_threshold);

/// Sum 4 rho (1 - rho) / N.
double non_discreteness(std::span<const double> rho);

/// Compliance, volumes and their derivatives with respect to every design
/// variable, all at one design point.
struct Evaluation
{
    double compliance = 0.0;
    std::vector<double> density; // physical densities
    std::vector<Vec2> positions;
    std::vector<double> dc_xc, dc_xt, dc_sp;
    double concrete_volume = 0.0;
    double steel_volume = 0.0;
    std::vector<double> dvc_xc;
    std::vector<double> dvt_xt, dvt_sp;
    InnerLoopResult inner;
};

struct RunResult
{
    Problem problem; // ground structure after any splits
    DesignVector design;
    std::vector<double> density;
    std::vector<Vec2> positions;
    std::vector<IterationRecord> history;
    std::vector<InnerLoopReport> inner_reports; // one per outer iteration
    std::optional<VtsThicknessField> thickness;
    bool converged = false;
};

class Optimizer
{
public:
    explicit Optimizer(Problem problem);

    const Problem& problem() const { return problem_; }
    const DesignVector& design() const { return design_; }
    const std::vector<MovableAxis>& axes() const { return axes_; }
    const std::vector<IterationRecord>& history() const { return history_; }
    double ratio() const { return ratio_; }
    double beta() const;
    bool finished() const { return finished_; }

    /// Replaces the design (sizes must match) and clears the MMA history.
    void set_design(DesignVector design);

    /// Full evaluation: runs the bimodulus loop warm-started from the last
    /// accepted state unless `frozen` is given, in which case the material
    /// state is held fixed (the sensitivities are exact for that map).
    Evaluation evaluate(const DesignVector& design, const StiffnessAssignment* frozen = nullptr);

    /// One outer iteration; returns its record. Throws on inner-loop or MMA
    /// failure.
    const IterationRecord& step();

    /// Iterates until convergence (after the ratio floor, the final beta and
    /// the last split) or the iteration cap.
    RunResult run(const std::function<void(const IterationRecord&)>& progress = {});

    /// Last accepted material state (warm start for the next iteration).
    const StiffnessAssignment& assignment() const { return assignment_; }

private:
    void repair_volumes(DesignVector& design);
    double concrete_volume(const std::vector<double>& x_c);
    double steel_volume(const DesignVector& design) const;
    bool schedules_done() const;
    void maybe_split();

    Problem problem_;
    FilterChain filter_;
    Penalization penalization_;
    DesignVector design_;
    std::vector<MovableAxis> axes_;
    MmaState mma_;
    MmaSettings mma_settings_;
    StiffnessAssignment assignment_;
    double ratio_ = 1.0;
    std::size_t beta_index_ = 0;
    int at_beta_ = 0;
    int since_split_ = 0;
    bool splits_done_ = true;
    int split_total_ = 0;
    double c0_ = 0.0;
    double last_change_ = 1.0;
    bool finished_ = false;
    bool converged_ = false;
    std::vector<IterationRecord> history_;
    std::vector<InnerLoopReport> inner_reports_;
};

/// Initial design: uniform x_c at the concrete budget (or the configured
/// value), x_t at the steel budget, nodes at their initial positions.
DesignVector initial_design(const Problem& problem, std::span<const MovableAxis> axes);

struct GradientFamily
{
    std::string name;
    int count = 0;
    double max_rel_error = 0.0;                      // at the best step
    double best_step = 0.0;
    std::vector<std::pair<double, double>> sweep;    // (step, max relative error)
};

struct GradientReport
{
    std::vector<GradientFamily> families; // x_c, x_t, x_p
};

/// Central finite differences of the frozen-state compliance against the
/// analytic gradient at a deterministic, non-uniform design. The relative
/// error of a component is |a - fd| / max(|a|, 1e-3 max|a| over its family).
GradientReport check_gradients(const Problem& problem, std::span<const double> steps = {});

} // namespace rcto
