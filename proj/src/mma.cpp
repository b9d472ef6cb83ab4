#include "rcto/mma.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rcto/errors.hpp"

namespace rcto {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Approximation
{
    VectorXd low, upp, alpha, beta;
    VectorXd p0, q0;
    MatrixXd P, Q; // m x n
    VectorXd b;
};

struct DualPoint
{
    VectorXd x, y, grad;
    double W = 0.0;
};

DualPoint evaluate_dual(const Approximation& a, const VectorXd& lambda, const MmaSettings& s)
{
    const Eigen::Index n = a.p0.size();
    const Eigen::Index m = a.b.size();
    DualPoint out;
    out.x.resize(n);
    out.grad = -a.b;
    out.W = -lambda.dot(a.b);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double Pj = a.p0[j] + lambda.dot(a.P.col(j));
        const double Qj = a.q0[j] + lambda.dot(a.Q.col(j));
        const double sp = std::sqrt(Pj), sq = std::sqrt(Qj);
        double x = (sp * a.low[j] + sq * a.upp[j]) / (sp + sq);
        x = std::clamp(x, a.alpha[j], a.beta[j]);
        out.x[j] = x;
        const double ux = 1.0 / (a.upp[j] - x), xl = 1.0 / (x - a.low[j]);
        out.W += Pj * ux + Qj * xl;
        for (Eigen::Index i = 0; i < m; ++i) out.grad[i] += a.P(i, j) * ux + a.Q(i, j) * xl;
    }
    out.y.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double y = std::max(0.0, (lambda[i] - s.c) / s.d);
        out.y[i] = y;
        out.W += s.c * y + 0.5 * s.d * y * y - lambda[i] * y;
        out.grad[i] -= y;
    }
    return out;
}

MatrixXd dual_hessian(const Approximation& a, const VectorXd& lambda, const DualPoint& pt, const MmaSettings& s)
{
    const Eigen::Index n = a.p0.size();
    const Eigen::Index m = a.b.size();
    MatrixXd H = MatrixXd::Zero(m, m);
    VectorXd gp(m);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double x = pt.x[j];
        if (x <= a.alpha[j] || x >= a.beta[j]) continue;
        const double ux = 1.0 / (a.upp[j] - x), xl = 1.0 / (x - a.low[j]);
        const double Pj = a.p0[j] + lambda.dot(a.P.col(j));
        const double Qj = a.q0[j] + lambda.dot(a.Q.col(j));
        const double curv = 2.0 * Pj * ux * ux * ux + 2.0 * Qj * xl * xl * xl;
        for (Eigen::Index i = 0; i < m; ++i) gp[i] = a.P(i, j) * ux * ux - a.Q(i, j) * xl * xl;
        H.noalias() -= gp * gp.transpose() / curv;
    }
    for (Eigen::Index i = 0; i < m; ++i)
        if (lambda[i] > s.c) H(i, i) -= 1.0 / s.d;
    return H;
}

double projected_norm(const VectorXd& lambda, const VectorXd& grad)
{
    double r = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        const double pg = lambda[i] > 0.0 ? grad[i] : std::max(grad[i], 0.0);
        r = std::max(r, std::abs(pg));
    }
    return r;
}

/// Maximizes the concave dual by projected Newton with Armijo backtracking.
VectorXd solve_dual(const Approximation& a, const MmaSettings& s, int& iterations)
{
    const Eigen::Index m = a.b.size();
    VectorXd lambda = VectorXd::Ones(m);
    if (m == 0) return lambda;
    const double scale = 1.0 + a.b.cwiseAbs().maxCoeff();
    iterations = 0;
    DualPoint pt = evaluate_dual(a, lambda, s);
    for (; iterations < s.max_dual_iters; ++iterations) {
        if (projected_norm(lambda, pt.grad) <= s.dual_tol * scale) break;

        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < m; ++i)
            if (lambda[i] > 0.0 || pt.grad[i] > 0.0) free.push_back(i);
        const MatrixXd H = dual_hessian(a, lambda, pt, s);
        const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
        MatrixXd Hf(nf, nf);
        VectorXd gf(nf);
        double hmax = 0.0;
        for (Eigen::Index r = 0; r < nf; ++r) {
            gf[r] = pt.grad[free[r]];
            for (Eigen::Index c = 0; c < nf; ++c) Hf(r, c) = -H(free[r], free[c]);
            hmax = std::max(hmax, Hf(r, r));
        }
        Hf.diagonal().array() += std::max(1e-12, 1e-10 * hmax);
        VectorXd step = Hf.ldlt().solve(gf);
        const double cap = 1e4 * (1.0 + lambda.cwiseAbs().maxCoeff());
        if (step.cwiseAbs().maxCoeff() > cap) step *= cap / step.cwiseAbs().maxCoeff();

        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            VectorXd trial = lambda;
            for (Eigen::Index r = 0; r < nf; ++r) trial[free[r]] = std::max(0.0, lambda[free[r]] + t * step[r]);
            DualPoint next = evaluate_dual(a, trial, s);
            if (next.W >= pt.W + 1e-4 * pt.grad.dot(trial - lambda)) {
                const bool moved = (trial - lambda).cwiseAbs().maxCoeff() > 0.0;
                lambda = std::move(trial);
                pt = std::move(next);
                accepted = moved;
                break;
            }
        }
        if (!accepted) break;
    }
    return lambda;
}

double subproblem_kkt(const Approximation& a, const VectorXd& lambda, const DualPoint& pt)
{
    double r = 0.0;
    for (Eigen::Index j = 0; j < pt.x.size(); ++j) {
        const double x = pt.x[j];
        const double ux = 1.0 / (a.upp[j] - x), xl = 1.0 / (x - a.low[j]);
        const double Pj = a.p0[j] + lambda.dot(a.P.col(j));
        const double Qj = a.q0[j] + lambda.dot(a.Q.col(j));
        const double gp = Pj * ux * ux, gq = Qj * xl * xl;
        double grad = gp - gq;
        if (x <= a.alpha[j]) grad = std::min(grad, 0.0);
        if (x >= a.beta[j]) grad = std::max(grad, 0.0);
        r = std::max(r, std::abs(grad) / (gp + gq));
    }
    // pt.grad is the approximated constraint value minus y
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        r = std::max(r, std::max(pt.grad[i], 0.0));
        r = std::max(r, std::abs(lambda[i] * pt.grad[i]));
    }
    return r;
}

Approximation build(const MmaInput& in, const MmaState& st, const MmaSettings& s, bool move_limits)
{
    const Eigen::Index n = in.x.size();
    const Eigen::Index m = in.g.size();
    Approximation a;
    a.low = st.low;
    a.upp = st.upp;
    a.alpha.resize(n);
    a.beta.resize(n);
    a.p0.resize(n);
    a.q0.resize(n);
    a.P.resize(m, n);
    a.Q.resize(m, n);
    a.b = -in.g;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double x = in.x[j];
        const double range = std::max(in.xmax[j] - in.xmin[j], 1e-5);
        double lo = std::max(in.xmin[j], a.low[j] + s.albefa * (x - a.low[j]));
        double hi = std::min(in.xmax[j], a.upp[j] - s.albefa * (a.upp[j] - x));
        if (move_limits) {
            lo = std::max(lo, x - st.move[j] * range);
            hi = std::min(hi, x + st.move[j] * range);
        }
        a.alpha[j] = lo;
        a.beta[j] = std::max(lo, hi);

        const double ux = a.upp[j] - x, xl = x - a.low[j];
        const double ux2 = ux * ux, xl2 = xl * xl;
        const double g0 = in.df0[j];
        const double pq0 = 0.001 * std::abs(g0) + s.raa0 / range;
        a.p0[j] = (std::max(g0, 0.0) + pq0) * ux2;
        a.q0[j] = (std::max(-g0, 0.0) + pq0) * xl2;
        if (s.secant_curvature && st.iteration >= 2 && st.dfold1.size() == n) {
            const double dx = x - st.xold1[j];
            const bool oscillating = dx * (st.xold1[j] - st.xold2[j]) < 0.0;
            if (oscillating && std::abs(dx) > 1e-12 * range) {
                const double secant = (g0 - st.dfold1[j]) / dx;
                const double curvature = 2.0 * (a.p0[j] / (ux2 * ux) + a.q0[j] / (xl2 * xl));
                if (secant > curvature) {
                    const double delta = (secant - curvature) / (2.0 * (1.0 / ux + 1.0 / xl));
                    a.p0[j] += delta * ux2;
                    a.q0[j] += delta * xl2;
                }
            }
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            const double gi = in.dg(i, j);
            const double pq = 0.001 * std::abs(gi) + s.raa0 / range;
            a.P(i, j) = (std::max(gi, 0.0) + pq) * ux2;
            a.Q(i, j) = (std::max(-gi, 0.0) + pq) * xl2;
            a.b[i] += a.P(i, j) / ux + a.Q(i, j) / xl;
        }
    }
    return a;
}

void update_asymptotes(const MmaInput& in, MmaState& st, const MmaSettings& s)
{
    const Eigen::Index n = in.x.size();
    if (st.iteration < 2 || st.low.size() != n) {
        st.low.resize(n);
        st.upp.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double range = in.xmax[j] - in.xmin[j];
            st.low[j] = in.x[j] - s.asyinit * range;
            st.upp[j] = in.x[j] + s.asyinit * range;
        }
        return;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        const double x = in.x[j];
        const double range = in.xmax[j] - in.xmin[j];
        const double osc = (x - st.xold1[j]) * (st.xold1[j] - st.xold2[j]);
        const double gamma = osc < 0.0 ? s.asydecr : (osc > 0.0 ? s.asyincr : 1.0);
        double lo = x - gamma * (st.xold1[j] - st.low[j]);
        double hi = x + gamma * (st.upp[j] - st.xold1[j]);
        lo = std::clamp(lo, x - s.asymax * range, x - s.asymin * range);
        hi = std::clamp(hi, x + s.asymin * range, x + s.asymax * range);
        st.low[j] = lo;
        st.upp[j] = hi;
    }
}

} // namespace

MmaState make_mma_state(Eigen::Index n, double move)
{
    MmaState st;
    st.move = VectorXd::Constant(n, move);
    return st;
}

SubproblemResult mma_step(const MmaInput& in, MmaState& st, const MmaSettings& s)
{
    const Eigen::Index n = in.x.size();
    const Eigen::Index m = in.g.size();
    if (in.df0.size() != n || in.dg.rows() != m || in.dg.cols() != n || in.xmin.size() != n ||
        in.xmax.size() != n)
        throw Error("mma-infeasible", "inconsistent MMA input dimensions");
    if (st.move.size() != n) st.move = VectorXd::Constant(n, st.move.size() ? st.move[0] : 1.0);
    if (st.iteration > 0 && st.xold1.size() != n) st.reset();

    update_asymptotes(in, st, s);

    // A positive artificial variable either means the constraint is out of
    // reach or that its price c is too low for the objective's scale; the
    // price is escalated before the move limits are relaxed.
    SubproblemResult res;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const Approximation a = build(in, st, s, attempt == 0);
        MmaSettings priced = s;
        for (int escalation = 0; escalation < 4; ++escalation, priced.c *= 1e3) {
            int iters = 0;
            const VectorXd lambda = solve_dual(a, priced, iters);
            const DualPoint pt = evaluate_dual(a, lambda, priced);
            res.x = pt.x;
            res.lambda = lambda;
            res.y = pt.y;
            res.alpha = a.alpha;
            res.beta = a.beta;
            res.kkt = subproblem_kkt(a, lambda, pt);
            res.dual_iterations = iters;
            res.relaxed = attempt == 1;
            if (m == 0 || pt.y.maxCoeff() <= s.infeasibility_tol) break;
        }
        if (m == 0 || res.y.maxCoeff() <= s.infeasibility_tol) break;
        if (attempt == 1) {
            Eigen::Index worst = 0;
            res.y.maxCoeff(&worst);
            throw Error("mma-infeasible", "constraint " + std::to_string(worst) +
                                              " cannot be satisfied by the convex subproblem (violation " +
                                              std::to_string(res.y[worst]) + ")");
        }
    }

    st.xold2 = st.iteration >= 1 ? st.xold1 : in.x;
    st.xold1 = in.x;
    st.dfold1 = in.df0;
    ++st.iteration;
    return res;
}

double kkt_residual(const VectorXd& x, const VectorXd& lambda, const VectorXd& df0, const VectorXd& g,
                    const MatrixXd& dg, const VectorXd& xmin, const VectorXd& xmax)
{
    VectorXd grad = df0;
    if (lambda.size()) grad.noalias() += dg.transpose() * lambda;
    double r = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double tol = 1e-12 * std::max(1.0, xmax[j] - xmin[j]);
        double gj = grad[j];
        if (x[j] <= xmin[j] + tol) gj = std::min(gj, 0.0);
        if (x[j] >= xmax[j] - tol) gj = std::max(gj, 0.0);
        r = std::max(r, std::abs(gj));
    }
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        r = std::max(r, std::max(g[i], 0.0));
        r = std::max(r, std::abs(lambda[i] * g[i]));
        r = std::max(r, std::max(-lambda[i], 0.0));
    }
    return r;
}

} // namespace rcto
