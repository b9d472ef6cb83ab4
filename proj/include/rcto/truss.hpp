#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "rcto/domain.hpp"
#include "rcto/fea.hpp"

namespace rcto {

using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

/// Direction cosines and the 4x4 rotation of a two-node bar.
struct MemberTransform
{
    Mat4 T = Mat4::Identity();
    double C = 1.0;
    double S = 0.0;
    double length = 0.0;
};

/// Throws Error("zero-length-member") carrying `member_id` when the
/// endpoints are closer than `min_length`.
MemberTransform transformation(const Vec2& a, const Vec2& b, double min_length = 0.0, int member_id = -1);

/// Axial bar stiffness in local coordinates, (E A / L) [1 0 -1 0; 0 0 0 0; ...].
Mat4 local_stiffness(double modulus, double area, double length);

/// T^T Kbar T in global coordinates.
Mat4 global_stiffness(double modulus, double area, const Vec2& a, const Vec2& b, double min_length = 0.0,
                      int member_id = -1);

/// d(T^T Kbar T)/d(coordinate) for `endpoint` 0/1 and `axis` 0 (x) / 1 (y),
/// expanded through dT and dKbar term by term.
Mat4 global_stiffness_derivative(double modulus, double area, const Vec2& a, const Vec2& b, int endpoint, int axis);

/// Raw spreading kernel 0.5 cos(pi d / r) + 0.5 inside the radius, 0 outside.
double spread_kernel(double distance, double radius);

/// Normalized weights tying one truss node to the continuum nodes within
/// the spreading radius. `gradients[k]` is d weight_k / d position.
struct SpreadRow
{
    std::vector<int> nodes;
    std::vector<double> weights;
    std::vector<Vec2> gradients;
};

/// Throws Error("isolated-node") when no continuum node lies within
/// `radius` of the truss node.
SpreadRow spread_weights(const Vec2& position, const Mesh& mesh, double radius, int truss_node = -1);

struct SpreadMap
{
    double radius = 0.0;
    std::vector<SpreadRow> rows; // one per truss node
};

SpreadMap build_spread_map(const Mesh& mesh, std::span<const Vec2> positions, double radius);

/// Interpolated endpoint displacements (ua_x, ua_y, ub_x, ub_y).
Vec4 interpolate_endpoints(const SpreadRow& a, const SpreadRow& b, const Eigen::VectorXd& d);

/// The 4 x m interpolation matrix Ntilde_e together with its continuum DOF list.
struct MemberInterpolation
{
    std::vector<int> dofs;
    Eigen::MatrixXd N;
};

MemberInterpolation member_interpolation(const SpreadRow& a, const SpreadRow& b);

/// Ntilde_e^T K_e Ntilde_e acting on the continuum DOFs.
StiffnessBlock couple_to_continuum(const Mat4& K_e, const SpreadRow& a, const SpreadRow& b);

/// A member as seen by the analysis: current geometry and its effective
/// stiffness parameters. `scale` is the sizing penalization s(x_t).
struct MemberState
{
    int node_a = 0;
    int node_b = 0;
    double area = 0.0;
    double modulus = 0.0;
    double scale = 1.0;
};

/// Elongation of a member under the interpolated endpoint motion.
double member_elongation(const Vec2& a, const Vec2& b, const Vec4& endpoint_displacement);

/// dc/dx for every truss node coordinate, laid out (x0, y0, x1, y1, ...).
/// Sums over attached members the stiffness derivative (through the
/// transformation and the length) plus the motion of the spreading weights.
std::vector<double> node_position_sensitivity(std::span<const MemberState> members, std::span<const Vec2> positions,
                                              const SpreadMap& spread, const Eigen::VectorXd& d);

/// dc/dx_t of one member given d scale / d x_t. Never positive.
double sizing_sensitivity(const MemberState& member, std::span<const Vec2> positions, const SpreadMap& spread,
                          const Eigen::VectorXd& d, double scale_derivative);

struct SplitResult
{
    GroundStructure ground;      // nodes re-based at the current positions
    std::vector<double> sizing;  // x_t per new member
    int split_count = 0;
    std::vector<int> skipped;    // members that qualified but could not be split
};

/// Halves every member longer than `max_length`. Midpoint nodes get the
/// average of the endpoint boxes, x-extent capped at y-extent / anisotropy,
/// then shrunk until no member can collapse below `min_length`.
SplitResult split_members(const GroundStructure& ground, std::span<const Vec2> positions,
                          std::span<const double> sizing, double max_length, double min_length, double anisotropy);

} // namespace rcto
