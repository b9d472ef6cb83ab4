#pragma once

#include <Eigen/Core>

namespace rcto {

struct MmaSettings
{
    double asyinit = 0.5;
    double asyincr = 1.2;
    double asydecr = 0.7;
    double asymin = 0.01; // asymptote distance bounds, fractions of the range
    double asymax = 10.0;
    double albefa = 0.1;
    double raa0 = 1e-5;
    double c = 1000.0; // linear cost of the artificial variables
    double d = 1.0;    // quadratic cost of the artificial variables
    double dual_tol = 1e-12;
    int max_dual_iters = 200;
    double infeasibility_tol = 1e-7;
    bool secant_curvature = true; // on oscillating variables, lift the objective curvature to the secant estimate
};

/// Asymptotes and iterate history carried between steps. `move` holds the
/// per-variable move limit as a fraction of the variable range.
struct MmaState
{
    Eigen::VectorXd low;
    Eigen::VectorXd upp;
    Eigen::VectorXd xold1;
    Eigen::VectorXd xold2;
    Eigen::VectorXd dfold1; // objective gradient at xold1
    Eigen::VectorXd move;
    int iteration = 0;

    /// Forgets the history; the next step re-initializes the asymptotes.
    void reset() { iteration = 0; }
};

MmaState make_mma_state(Eigen::Index n, double move);

/// min f0(x) s.t. g_i(x) <= 0, xmin <= x <= xmax, with gradients at x.
/// `dg` is m x n.
struct MmaInput
{
    Eigen::VectorXd x;
    Eigen::VectorXd xmin;
    Eigen::VectorXd xmax;
    double f0 = 0.0;
    Eigen::VectorXd df0;
    Eigen::VectorXd g;
    Eigen::MatrixXd dg;
};

struct SubproblemResult
{
    Eigen::VectorXd x;
    Eigen::VectorXd lambda;
    Eigen::VectorXd y;        // artificial infeasibility variables
    Eigen::VectorXd alpha;    // effective lower box incl. move limits
    Eigen::VectorXd beta;     // effective upper box incl. move limits
    double kkt = 0.0;         // residual of the convex subproblem's own KKT system
    int dual_iterations = 0;
    bool relaxed = false;     // move limits had to be dropped
};

/// One MMA iteration: updates the asymptotes in `state`, builds the convex
/// separable approximation and solves it through its dual. If the
/// approximated constraints cannot be met inside the move limits, the step
/// is retried once on the full asymptote box; persisting infeasibility
/// throws Error("mma-infeasible").
SubproblemResult mma_step(const MmaInput& input, MmaState& state, const MmaSettings& settings = {});

/// max(|projected gradient of the Lagrangian|_inf, |lambda_i g_i|, max(g_i, 0),
/// max(-lambda_i, 0)) for the original problem.
double kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda, const Eigen::VectorXd& df0,
                    const Eigen::VectorXd& g, const Eigen::MatrixXd& dg, const Eigen::VectorXd& xmin,
                    const Eigen::VectorXd& xmax);

} // namespace rcto
