#pragma once

// Reference implementations that share no code with the library: the
// classic closed-form Q4 stiffness and an optimality-criteria SIMP loop.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace oracle {

using Mat8 = Eigen::Matrix<double, 8, 8>;

/// Closed-form bilinear square element, unit thickness, nodes CCW from the
/// lower-left corner.
inline Mat8 ke_closed_form(double E, double nu)
{
    const double k[8] = {0.5 - nu / 6,        0.125 + nu / 8, -0.25 - nu / 12, -0.125 + 3 * nu / 8,
                         -0.25 + nu / 12,     -0.125 - nu / 8, nu / 6,          0.125 - 3 * nu / 8};
    const int idx[8][8] = {{0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 7, 6, 5, 4, 3, 2}, {2, 7, 0, 5, 6, 3, 4, 1},
                           {3, 6, 5, 0, 7, 2, 1, 4}, {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 3, 2, 1, 0, 7, 6},
                           {6, 3, 4, 1, 2, 7, 0, 5}, {7, 2, 1, 4, 3, 6, 5, 0}};
    Mat8 K;
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) K(r, c) = E / (1 - nu * nu) * k[idx[r][c]];
    return K;
}

struct OcResult
{
    double compliance = 0.0;
    int iterations = 0;
    std::vector<double> density;
};

/// Half MBB beam (left edge on rollers in x, lower-right corner on a roller
/// in y, unit downward load at the upper-left corner), density filter with
/// linear weights R - dist, OC update with move 0.2.
inline OcResult mbb_optimality_criteria(int nelx, int nely, double volfrac, double rmin, double E, double nu,
                                        double penal = 3.0, double Emin = 1e-9, int max_iters = 300,
                                        double tol = 0.01)
{
    const int ndof = 2 * (nelx + 1) * (nely + 1);
    const int nel = nelx * nely;
    const Mat8 KE = ke_closed_form(E, nu);

    // node (i, j) with j counted from the top, as in the classic code
    auto node = [&](int i, int j) { return i * (nely + 1) + j; };
    std::vector<std::array<int, 8>> edof(nel);
    for (int ex = 0; ex < nelx; ++ex) {
        for (int ey = 0; ey < nely; ++ey) {
            const int n1 = node(ex, ey + 1), n2 = node(ex + 1, ey + 1), n3 = node(ex + 1, ey), n4 = node(ex, ey);
            edof[ex * nely + ey] = {2 * n1, 2 * n1 + 1, 2 * n2, 2 * n2 + 1, 2 * n3, 2 * n3 + 1, 2 * n4, 2 * n4 + 1};
        }
    }
    std::vector<char> fixed(ndof, 0);
    for (int j = 0; j <= nely; ++j) fixed[2 * node(0, j)] = 1;
    fixed[2 * node(nelx, nely) + 1] = 1;
    std::vector<int> free_map(ndof, -1);
    int nfree = 0;
    for (int d = 0; d < ndof; ++d)
        if (!fixed[d]) free_map[d] = nfree++;
    Eigen::VectorXd F = Eigen::VectorXd::Zero(nfree);
    F[free_map[2 * node(0, 0) + 1]] = -1.0;

    // filter
    std::vector<std::vector<std::pair<int, double>>> H(nel);
    std::vector<double> Hs(nel, 0.0);
    const int reach = static_cast<int>(std::ceil(rmin));
    for (int i1 = 0; i1 < nelx; ++i1)
        for (int j1 = 0; j1 < nely; ++j1) {
            const int e1 = i1 * nely + j1;
            for (int i2 = std::max(i1 - reach, 0); i2 <= std::min(i1 + reach, nelx - 1); ++i2)
                for (int j2 = std::max(j1 - reach, 0); j2 <= std::min(j1 + reach, nely - 1); ++j2) {
                    const double w = rmin - std::sqrt(double((i1 - i2) * (i1 - i2) + (j1 - j2) * (j1 - j2)));
                    if (w > 0) {
                        H[e1].emplace_back(i2 * nely + j2, w);
                        Hs[e1] += w;
                    }
                }
        }
    auto filter = [&](const std::vector<double>& x) {
        std::vector<double> y(nel, 0.0);
        for (int e = 0; e < nel; ++e) {
            for (auto [k, w] : H[e]) y[e] += w * x[k];
            y[e] /= Hs[e];
        }
        return y;
    };
    auto filter_t = [&](const std::vector<double>& y) {
        std::vector<double> x(nel, 0.0);
        for (int e = 0; e < nel; ++e)
            for (auto [k, w] : H[e]) x[k] += w * y[e] / Hs[e];
        return x;
    };

    std::vector<double> x(nel, volfrac), phys = x;
    OcResult res;
    double change = 1.0;
    while (change > tol && res.iterations < max_iters) {
        ++res.iterations;
        std::vector<Eigen::Triplet<double>> trip;
        for (int e = 0; e < nel; ++e) {
            const double s = Emin / E + std::pow(phys[e], penal) * (1 - Emin / E);
            for (int a = 0; a < 8; ++a) {
                const int ra = free_map[edof[e][a]];
                if (ra < 0) continue;
                for (int b = 0; b < 8; ++b) {
                    const int rb = free_map[edof[e][b]];
                    if (rb >= 0) trip.emplace_back(ra, rb, s * KE(a, b));
                }
            }
        }
        Eigen::SparseMatrix<double> K(nfree, nfree);
        K.setFromTriplets(trip.begin(), trip.end());
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(K);
        const Eigen::VectorXd Uf = llt.solve(F);
        Eigen::VectorXd U = Eigen::VectorXd::Zero(ndof);
        for (int d = 0; d < ndof; ++d)
            if (free_map[d] >= 0) U[d] = Uf[free_map[d]];

        std::vector<double> dc(nel), dv(nel, 1.0);
        double c = 0.0;
        for (int e = 0; e < nel; ++e) {
            Eigen::Matrix<double, 8, 1> ue;
            for (int a = 0; a < 8; ++a) ue[a] = U[edof[e][a]];
            const double ce = ue.dot(KE * ue);
            c += (Emin / E + std::pow(phys[e], penal) * (1 - Emin / E)) * ce;
            dc[e] = -penal * (1 - Emin / E) * std::pow(phys[e], penal - 1) * ce;
        }
        res.compliance = c;
        dc = filter_t(dc);
        dv = filter_t(dv);

        double l1 = 0.0, l2 = 1e9;
        std::vector<double> xnew(nel);
        const double move = 0.2;
        while ((l2 - l1) / (l1 + l2) > 1e-3) {
            const double lmid = 0.5 * (l2 + l1);
            for (int e = 0; e < nel; ++e) {
                const double be = std::sqrt(-dc[e] / dv[e] / lmid);
                xnew[e] = std::max(0.0, std::max(x[e] - move, std::min(1.0, std::min(x[e] + move, x[e] * be))));
            }
            phys = filter(xnew);
            double sum = 0.0;
            for (double p : phys) sum += p;
            (sum > volfrac * nel ? l1 : l2) = lmid;
        }
        change = 0.0;
        for (int e = 0; e < nel; ++e) change = std::max(change, std::abs(xnew[e] - x[e]));
        x = xnew;
    }
    res.density = phys;
    return res;
}

} // namespace oracle
