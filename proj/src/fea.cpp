#include "rcto/fea.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "rcto/errors.hpp"

namespace rcto {

Mat3 isotropic_plane_stress(double E, double nu)
{
    Mat3 D;
    const double f = E / (1.0 - nu * nu);
    D << f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, E / (2.0 * (1.0 + nu));
    return D;
}

ConstitutiveMatrix constitutive_global(double E1, double E2, double nu1, double theta)
{
    if (!(E1 > 0.0) || !(E2 > 0.0)) throw Error("degenerate-material", "moduli must be positive");
    ConstitutiveMatrix out;
    out.E1 = E1;
    out.E2 = E2;
    out.nu1 = nu1;
    out.nu2 = nu1 * E2 / E1;
    out.theta = theta;
    const double nu12 = out.nu1 * out.nu2;
    if (nu12 >= 1.0) throw Error("degenerate-material", "nu1 * nu2 >= 1");

    // shear compliance 1/G12 = (1 + nu1)/E1 + (1 + nu2)/E2
    const double shear_compliance = (1.0 + out.nu1) / E1 + (1.0 + out.nu2) / E2;
    const double f = 1.0 / (1.0 - nu12);
    Mat3 local;
    local << f * E1, f * nu1 * E2, 0.0, f * nu1 * E2, f * E2, 0.0, 0.0, 0.0, 1.0 / shear_compliance;

    if (E1 == E2) {
        out.D = local;
        return out;
    }
    // engineering-strain rotation global -> principal frame: D = T^T D' T
    const double c = std::cos(theta), s = std::sin(theta);
    Mat3 T;
    T << c * c, s * s, c * s, s * s, c * c, -c * s, -2.0 * c * s, 2.0 * c * s, c * c - s * s;
    out.D = T.transpose() * local * T;
    out.D = 0.5 * (out.D + out.D.transpose()).eval();
    return out;
}

std::array<Eigen::Vector2d, kGaussPoints> gauss_points()
{
    const double g = 1.0 / std::sqrt(3.0);
    return {Eigen::Vector2d(-g, -g), Eigen::Vector2d(g, -g), Eigen::Vector2d(g, g), Eigen::Vector2d(-g, g)};
}

StrainDisplacement strain_displacement(double xi, double eta, double element_size)
{
    static constexpr double xs[4] = {-1.0, 1.0, 1.0, -1.0};
    static constexpr double ys[4] = {-1.0, -1.0, 1.0, 1.0};
    const double scale = 2.0 / element_size;
    StrainDisplacement B = StrainDisplacement::Zero();
    for (int a = 0; a < 4; ++a) {
        const double dx = 0.25 * xs[a] * (1.0 + eta * ys[a]) * scale;
        const double dy = 0.25 * ys[a] * (1.0 + xi * xs[a]) * scale;
        B(0, 2 * a) = dx;
        B(1, 2 * a + 1) = dy;
        B(2, 2 * a) = dy;
        B(2, 2 * a + 1) = dx;
    }
    return B;
}

Mat8 element_stiffness(std::span<const Mat3, kGaussPoints> D, double element_size, double thickness)
{
    const double det_j = 0.25 * element_size * element_size;
    const auto gp = gauss_points();
    Mat8 K = Mat8::Zero();
    for (int g = 0; g < kGaussPoints; ++g) {
        const StrainDisplacement B = strain_displacement(gp[g].x(), gp[g].y(), element_size);
        K.noalias() += B.transpose() * D[g] * B;
    }
    K *= thickness * det_j;
    return 0.5 * (K + K.transpose());
}

Mat8 element_stiffness(const Mat3& D, double element_size, double thickness)
{
    const std::array<Mat3, kGaussPoints> Ds{D, D, D, D};
    return element_stiffness(std::span<const Mat3, kGaussPoints>(Ds), element_size, thickness);
}

GaussPointState principal_state(double sxx, double syy, double sxy)
{
    GaussPointState s{sxx, syy, sxy};
    const double mean = 0.5 * (sxx + syy);
    const double radius = std::hypot(0.5 * (sxx - syy), sxy);
    s.s1 = mean + radius;
    s.s2 = mean - radius;
    s.theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    return s;
}

std::array<GaussPointState, kGaussPoints> principal_stresses(const Vec8& ue, std::span<const Mat3, kGaussPoints> D,
                                                             double element_size)
{
    const auto gp = gauss_points();
    std::array<GaussPointState, kGaussPoints> out;
    for (int g = 0; g < kGaussPoints; ++g) {
        const Eigen::Vector3d sigma = D[g] * (strain_displacement(gp[g].x(), gp[g].y(), element_size) * ue);
        out[g] = principal_state(sigma[0], sigma[1], sigma[2]);
    }
    return out;
}

namespace {

std::vector<Eigen::Triplet<double>> triplets(const Mesh& mesh, std::span<const Mat8> elements,
                                             std::span<const StiffnessBlock> blocks, const std::vector<int>& map)
{
    std::vector<Eigen::Triplet<double>> t;
    std::size_t n = elements.size() * 64;
    for (const auto& b : blocks) n += b.dofs.size() * b.dofs.size();
    t.reserve(n);
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto dofs = mesh.element_dofs(e);
        const Mat8& K = elements[e];
        for (int a = 0; a < 8; ++a) {
            const int r = map[dofs[a]];
            if (r < 0) continue;
            for (int b = 0; b < 8; ++b) {
                const int c = map[dofs[b]];
                if (c >= 0) t.emplace_back(r, c, K(a, b));
            }
        }
    }
    for (const auto& blk : blocks) {
        const int m = static_cast<int>(blk.dofs.size());
        for (int a = 0; a < m; ++a) {
            const int r = map[blk.dofs[a]];
            if (r < 0) continue;
            for (int b = 0; b < m; ++b) {
                const int c = map[blk.dofs[b]];
                if (c >= 0) t.emplace_back(r, c, blk.k(a, b));
            }
        }
    }
    return t;
}

} // namespace

Eigen::SparseMatrix<double> assemble(const Mesh& mesh, std::span<const Mat8> elements,
                                     std::span<const StiffnessBlock> blocks)
{
    std::vector<int> identity(mesh.dof_count());
    for (int k = 0; k < mesh.dof_count(); ++k) identity[k] = k;
    Eigen::SparseMatrix<double> K(mesh.dof_count(), mesh.dof_count());
    const auto t = triplets(mesh, elements, blocks, identity);
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

Eigen::VectorXd load_vector(const Mesh& mesh, const BoundaryConditions& bc)
{
    Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.dof_count());
    for (const auto& l : bc.point_loads) f[l.dof] += l.magnitude;
    return f;
}

GlobalSystem assemble_and_solve(const Mesh& mesh, std::span<const Mat8> elements,
                                std::span<const StiffnessBlock> blocks, const BoundaryConditions& bc)
{
    const int n = mesh.dof_count();
    GlobalSystem sys;
    sys.f = load_vector(mesh, bc);
    sys.d = Eigen::VectorXd::Zero(n);

    std::vector<int> map(n, -1);
    int free = 0;
    for (int k = 0; k < n; ++k) {
        if (!std::binary_search(bc.fixed_dofs.begin(), bc.fixed_dofs.end(), k)) {
            map[k] = free++;
            sys.free_dofs.push_back(k);
        }
    }

    Eigen::VectorXd f_free(free);
    for (int k = 0; k < free; ++k) f_free[k] = sys.f[sys.free_dofs[k]];
    const double f_norm = f_free.norm();
    if (f_norm == 0.0) return sys;

    Eigen::SparseMatrix<double> K(free, free);
    const auto t = triplets(mesh, elements, blocks, map);
    K.setFromTriplets(t.begin(), t.end());

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    ldlt.compute(K);
    const Eigen::VectorXd& diag = ldlt.vectorD();
    int bad = -1;
    if (ldlt.info() == Eigen::Success) {
        const double scale = diag.cwiseAbs().maxCoeff();
        for (int k = 0; k < diag.size(); ++k) {
            if (!(diag[k] > 1e-14 * scale)) {
                bad = k;
                break;
            }
        }
    } else {
        bad = 0;
        for (int k = 0; k < diag.size(); ++k) {
            if (!(diag[k] > 0.0)) {
                bad = k;
                break;
            }
        }
    }
    if (bad >= 0) {
        const int dof = sys.free_dofs[ldlt.permutationPinv().indices()[bad]];
        throw SingularSystemError(dof, "singular stiffness: zero pivot at DOF " + std::to_string(dof));
    }

    const Eigen::VectorXd d_free = ldlt.solve(f_free);
    sys.residual = (K * d_free - f_free).norm() / f_norm;
    for (int k = 0; k < free; ++k) sys.d[sys.free_dofs[k]] = d_free[k];
    sys.compliance = sys.f.dot(sys.d);
    return sys;
}

} // namespace rcto
