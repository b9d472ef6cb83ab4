#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "rcto/domain.hpp"
#include "rcto/fea.hpp"
#include "rcto/truss.hpp"

namespace rcto {

/// Everything the analysis needs from the optimizer's design: stiffness
/// multipliers for elements and members and the current truss geometry.
struct PhysicalDesign
{
    std::vector<double> element_scale;
    std::vector<double> member_scale;
    std::vector<Vec2> node_positions;
};

struct GaussMaterial
{
    double E1 = 0.0;
    double E2 = 0.0;
    double nu1 = 0.0;
    double theta = 0.0;
    bool tension1 = false;
    bool tension2 = false;
};

/// Frozen tension/compression state of every Gauss point and member.
struct StiffnessAssignment
{
    std::vector<GaussMaterial> gauss; // kGaussPoints per element
    std::vector<double> member_modulus;
    std::vector<char> member_tension;
    double ratio = 1.0; // continuum E_tens / E_comp in force
};

/// All Gauss points in compression, all members in tension.
StiffnessAssignment stiff_assignment(const Problem& problem, std::size_t member_count, double ratio);

double tension_modulus(const BimodulusParams& params, double ratio);
double tension_poisson(const BimodulusParams& params, double ratio);

/// One continuation decrement of the stiffness ratio, clamped at the floor
/// (which maps exactly onto E_tens / E_comp).
double apply_continuation(const BimodulusParams& params, double ratio);
bool at_ratio_floor(const BimodulusParams& params, double ratio);

/// A linear solve under a fixed assignment plus the pieces needed for
/// sensitivities.
struct Analysis
{
    GlobalSystem system;
    std::vector<std::array<Mat3, kGaussPoints>> D; // unscaled, per element
    std::vector<Mat8> element_base;                 // unscaled element matrices
    std::vector<MemberState> members;
};

Analysis analyze(const Problem& problem, const PhysicalDesign& design, const SpreadMap& spread,
                 const StiffnessAssignment& assignment);

/// Stresses at the Gauss points of every element under `analysis`.
std::vector<GaussPointState> gauss_stresses(const Problem& problem, const Analysis& analysis);

struct Reassignment
{
    StiffnessAssignment assignment;
    int switched = 0;        // labels that flipped
    bool unchanged = false;  // resulting stiffness identical to the input
    int tension_violations = 0; // tension-labeled points now with s1 < 0
};

/// Labels every Gauss point and member from the displacement field of
/// `analysis` and returns the moduli for `ratio`.
Reassignment reassign(const Problem& problem, const PhysicalDesign& design, const SpreadMap& spread,
                      const Analysis& analysis, const StiffnessAssignment& current, double ratio);

struct InnerLoopReport
{
    int iterations = 0;
    std::vector<double> trace; // compliance of every solve
    std::vector<int> switched;
    std::vector<double> ratios;
    bool converged = false;
    double final_ratio = 0.0;
};

struct InnerLoopResult
{
    Analysis analysis;
    StiffnessAssignment assignment;
    InnerLoopReport report;
};

/// Fixed-point iteration between solve and modulus assignment. Ends when
/// compliance changes by less than `tol` relative and no tension-labeled
/// Gauss point carries a negative major principal stress; stalls (iteration cap or
/// a period-2 cycle) step the ratio down, and a stall at the floor throws
/// NonConvergenceError carrying the trace.
InnerLoopResult run_inner_loop(const Problem& problem, const PhysicalDesign& design, const SpreadMap& spread,
                               StiffnessAssignment start, double ratio);

/// CSV rows `outer,iteration,compliance,switched,ratio`.
void write_inner_trace(std::ostream& out, int outer_iteration, const InnerLoopReport& report);

} // namespace rcto
