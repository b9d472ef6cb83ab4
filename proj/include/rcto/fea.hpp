#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rcto/domain.hpp"

namespace rcto {

using Mat3 = Eigen::Matrix3d;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using StrainDisplacement = Eigen::Matrix<double, 3, 8>;

/// Plane-stress constitutive matrix with its principal-frame parameters.
/// Stress and engineering strain are ordered (xx, yy, xy).
struct ConstitutiveMatrix
{
    Mat3 D = Mat3::Zero();
    double theta = 0.0;
    double E1 = 0.0;
    double E2 = 0.0;
    double nu1 = 0.0;
    double nu2 = 0.0;
};

/// Orthotropic matrix with axis 1 at angle `theta` from global x.
/// nu2 follows from E1/nu1 = E2/nu2. Equal moduli short-circuit to the
/// unrotated (isotropic) matrix so isotropic states are bit-reproducible.
/// Throws Error("degenerate-material") when nu1*nu2 >= 1.
ConstitutiveMatrix constitutive_global(double E1, double E2, double nu1, double theta);

Mat3 isotropic_plane_stress(double E, double nu);

/// 2x2 Gauss points in natural coordinates, counter-clockwise from (-,-).
inline constexpr int kGaussPoints = 4;
std::array<Eigen::Vector2d, kGaussPoints> gauss_points();

StrainDisplacement strain_displacement(double xi, double eta, double element_size);

/// K_e = sum over Gauss points of B^T D B * thickness * detJ.
Mat8 element_stiffness(std::span<const Mat3, kGaussPoints> D, double element_size, double thickness);
Mat8 element_stiffness(const Mat3& D, double element_size, double thickness);

struct GaussPointState
{
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    double s1 = 0.0; // s1 >= s2
    double s2 = 0.0;
    double theta = 0.0; // direction of s1, in (-pi/2, pi/2]
};

/// Principal decomposition of a plane stress state; theta = 0 when the
/// state is hydrostatic.
GaussPointState principal_state(double sxx, double syy, double sxy);

std::array<GaussPointState, kGaussPoints> principal_stresses(const Vec8& element_displacement,
                                                             std::span<const Mat3, kGaussPoints> D,
                                                             double element_size);

/// Dense stiffness contribution acting on an arbitrary DOF list (used for
/// the spread truss members).
struct StiffnessBlock
{
    std::vector<int> dofs;
    Eigen::MatrixXd k;
};

struct GlobalSystem
{
    Eigen::VectorXd d;
    Eigen::VectorXd f;
    double compliance = 0.0;
    double residual = 0.0; // ||K_ff d_f - F_f|| / ||F_f||
    std::vector<int> free_dofs;
};

/// Assembles the full (unreduced) stiffness. Triplets are generated in a
/// fixed order so repeated assemblies are bit-identical.
Eigen::SparseMatrix<double> assemble(const Mesh& mesh, std::span<const Mat8> elements,
                                     std::span<const StiffnessBlock> blocks);

Eigen::VectorXd load_vector(const Mesh& mesh, const BoundaryConditions& bc);

/// Solves K d = F with the fixed DOFs eliminated, via a sparse LDL^T
/// factorization with AMD ordering. Throws SingularSystemError naming the
/// first zero-pivot DOF.
GlobalSystem assemble_and_solve(const Mesh& mesh, std::span<const Mat8> elements,
                                std::span<const StiffnessBlock> blocks, const BoundaryConditions& bc);

inline Vec8 gather(const Eigen::VectorXd& d, const std::array<int, 8>& dofs)
{
    Vec8 u;
    for (int k = 0; k < 8; ++k) u[k] = d[dofs[k]];
    return u;
}

} // namespace rcto
