#include "rcto/truss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rcto/errors.hpp"

namespace rcto {

MemberTransform transformation(const Vec2& a, const Vec2& b, double min_length, int member_id)
{
    const Vec2 delta = b - a;
    MemberTransform t;
    t.length = delta.norm();
    if (!(t.length > min_length) || t.length == 0.0) {
        throw Error("zero-length-member", "member " + std::to_string(member_id) + " has near-zero length " +
                                              std::to_string(t.length));
    }
    t.C = delta.x() / t.length;
    t.S = delta.y() / t.length;
    t.T << t.C, t.S, 0, 0, -t.S, t.C, 0, 0, 0, 0, t.C, t.S, 0, 0, -t.S, t.C;
    return t;
}

Mat4 local_stiffness(double modulus, double area, double length)
{
    Mat4 K = Mat4::Zero();
    const double k = modulus * area / length;
    K(0, 0) = k;
    K(0, 2) = -k;
    K(2, 0) = -k;
    K(2, 2) = k;
    return K;
}

Mat4 global_stiffness(double modulus, double area, const Vec2& a, const Vec2& b, double min_length, int member_id)
{
    const MemberTransform t = transformation(a, b, min_length, member_id);
    return t.T.transpose() * local_stiffness(modulus, area, t.length) * t.T;
}

Mat4 global_stiffness_derivative(double modulus, double area, const Vec2& a, const Vec2& b, int endpoint, int axis)
{
    const MemberTransform t = transformation(a, b);
    const double L = t.length, C = t.C, S = t.S;
    // derivatives with respect to the first endpoint; the second flips sign
    const double sign = endpoint == 0 ? 1.0 : -1.0;
    double dL, dC, dS;
    if (axis == 0) {
        dL = -C;
        dC = -S * S / L;
        dS = C * S / L;
    } else {
        dL = -S;
        dC = C * S / L;
        dS = -C * C / L;
    }
    dL *= sign;
    dC *= sign;
    dS *= sign;

    Mat4 dT;
    dT << dC, dS, 0, 0, -dS, dC, 0, 0, 0, 0, dC, dS, 0, 0, -dS, dC;
    const Mat4 Kbar = local_stiffness(modulus, area, L);
    const Mat4 dKbar = Kbar * (-dL / L);
    return dT.transpose() * Kbar * t.T + t.T.transpose() * dKbar * t.T + t.T.transpose() * Kbar * dT;
}

double spread_kernel(double distance, double radius)
{
    if (distance > radius) return 0.0;
    return 0.5 * std::cos(std::numbers::pi * distance / radius) + 0.5;
}

SpreadRow spread_weights(const Vec2& position, const Mesh& mesh, double radius, int truss_node)
{
    const double h = mesh.element_size;
    const Vec2 q = position - mesh.origin;
    const int i0 = std::max(0, static_cast<int>(std::ceil((q.x() - radius) / h)));
    const int i1 = std::min(mesh.nx, static_cast<int>(std::floor((q.x() + radius) / h)));
    const int j0 = std::max(0, static_cast<int>(std::ceil((q.y() - radius) / h)));
    const int j1 = std::min(mesh.ny, static_cast<int>(std::floor((q.y() + radius) / h)));

    SpreadRow row;
    std::vector<double> raw;
    std::vector<Vec2> raw_grad;
    const double k = std::numbers::pi / radius;
    for (int i = i0; i <= i1; ++i) {
        for (int j = j0; j <= j1; ++j) {
            const int node = mesh.node_id(i, j);
            const Vec2 offset = position - mesh.node_coords(node);
            const double dist = offset.norm();
            const double w = spread_kernel(dist, radius);
            if (!(w > 0.0)) continue;
            row.nodes.push_back(node);
            raw.push_back(w);
            raw_grad.push_back(dist > 0.0 ? Vec2(-0.5 * std::sin(k * dist) * k * offset / dist) : Vec2::Zero());
        }
    }
    double total = 0.0;
    Vec2 total_grad = Vec2::Zero();
    for (std::size_t n = 0; n < raw.size(); ++n) {
        total += raw[n];
        total_grad += raw_grad[n];
    }
    if (!(total > 0.0)) {
        throw Error("isolated-node", "truss node " + std::to_string(truss_node) +
                                         " has no continuum node within the spreading radius");
    }
    for (std::size_t n = 0; n < raw.size(); ++n) {
        const double w = raw[n] / total;
        row.weights.push_back(w);
        row.gradients.push_back((raw_grad[n] - w * total_grad) / total);
    }
    return row;
}

SpreadMap build_spread_map(const Mesh& mesh, std::span<const Vec2> positions, double radius)
{
    SpreadMap map;
    map.radius = radius;
    map.rows.reserve(positions.size());
    for (std::size_t k = 0; k < positions.size(); ++k)
        map.rows.push_back(spread_weights(positions[k], mesh, radius, static_cast<int>(k)));
    return map;
}

Vec4 interpolate_endpoints(const SpreadRow& a, const SpreadRow& b, const Eigen::VectorXd& d)
{
    Vec4 u = Vec4::Zero();
    for (std::size_t k = 0; k < a.nodes.size(); ++k) {
        u[0] += a.weights[k] * d[2 * a.nodes[k]];
        u[1] += a.weights[k] * d[2 * a.nodes[k] + 1];
    }
    for (std::size_t k = 0; k < b.nodes.size(); ++k) {
        u[2] += b.weights[k] * d[2 * b.nodes[k]];
        u[3] += b.weights[k] * d[2 * b.nodes[k] + 1];
    }
    return u;
}

MemberInterpolation member_interpolation(const SpreadRow& a, const SpreadRow& b)
{
    const int na = static_cast<int>(a.nodes.size());
    const int nb = static_cast<int>(b.nodes.size());
    MemberInterpolation out;
    out.N = Eigen::MatrixXd::Zero(4, 2 * (na + nb));
    out.dofs.reserve(2 * (na + nb));
    for (int k = 0; k < na; ++k) {
        out.dofs.push_back(2 * a.nodes[k]);
        out.dofs.push_back(2 * a.nodes[k] + 1);
        out.N(0, 2 * k) = a.weights[k];
        out.N(1, 2 * k + 1) = a.weights[k];
    }
    for (int k = 0; k < nb; ++k) {
        out.dofs.push_back(2 * b.nodes[k]);
        out.dofs.push_back(2 * b.nodes[k] + 1);
        out.N(2, 2 * (na + k)) = b.weights[k];
        out.N(3, 2 * (na + k) + 1) = b.weights[k];
    }
    return out;
}

StiffnessBlock couple_to_continuum(const Mat4& K_e, const SpreadRow& a, const SpreadRow& b)
{
    MemberInterpolation interp = member_interpolation(a, b);
    StiffnessBlock block;
    block.k = interp.N.transpose() * K_e * interp.N;
    block.k = 0.5 * (block.k + block.k.transpose()).eval();
    block.dofs = std::move(interp.dofs);
    return block;
}

double member_elongation(const Vec2& a, const Vec2& b, const Vec4& u)
{
    const Vec2 dir = (b - a).normalized();
    return (u[2] - u[0]) * dir.x() + (u[3] - u[1]) * dir.y();
}

std::vector<double> node_position_sensitivity(std::span<const MemberState> members, std::span<const Vec2> positions,
                                              const SpreadMap& spread, const Eigen::VectorXd& d)
{
    std::vector<double> grad(2 * positions.size(), 0.0);
    for (const MemberState& m : members) {
        const Vec2& pa = positions[m.node_a];
        const Vec2& pb = positions[m.node_b];
        const SpreadRow& ra = spread.rows[m.node_a];
        const SpreadRow& rb = spread.rows[m.node_b];
        const double area = m.area * m.scale;
        const Vec4 u = interpolate_endpoints(ra, rb, d);
        const Vec4 Ku = global_stiffness(m.modulus, area, pa, pb) * u;
        for (int end = 0; end < 2; ++end) {
            const SpreadRow& row = end == 0 ? ra : rb;
            const int node = end == 0 ? m.node_a : m.node_b;
            for (int axis = 0; axis < 2; ++axis) {
                const Mat4 dK = global_stiffness_derivative(m.modulus, area, pa, pb, end, axis);
                Vec4 du = Vec4::Zero();
                for (std::size_t k = 0; k < row.nodes.size(); ++k) {
                    du[2 * end] += row.gradients[k][axis] * d[2 * row.nodes[k]];
                    du[2 * end + 1] += row.gradients[k][axis] * d[2 * row.nodes[k] + 1];
                }
                grad[2 * node + axis] -= u.dot(dK * u) + 2.0 * du.dot(Ku);
            }
        }
    }
    return grad;
}

double sizing_sensitivity(const MemberState& m, std::span<const Vec2> positions, const SpreadMap& spread,
                          const Eigen::VectorXd& d, double scale_derivative)
{
    const Vec2& pa = positions[m.node_a];
    const Vec2& pb = positions[m.node_b];
    const Vec4 u = interpolate_endpoints(spread.rows[m.node_a], spread.rows[m.node_b], d);
    const double e = member_elongation(pa, pb, u);
    const double L = (pb - pa).norm();
    return -scale_derivative * m.modulus * m.area / L * e * e;
}

namespace {

struct Box
{
    Vec2 lo, hi;
};

bool separated(const Box& a, const Box& b, double gap)
{
    for (int k = 0; k < 2; ++k) {
        if (b.lo[k] - a.hi[k] > gap || a.lo[k] - b.hi[k] > gap) return true;
    }
    return false;
}

void cap_x_extent(Box& box, const Vec2& centre, double anisotropy)
{
    const double wx = box.hi.x() - box.lo.x();
    const double cap = (box.hi.y() - box.lo.y()) / anisotropy;
    if (wx <= cap || wx == 0.0) return;
    const double f = cap / wx;
    box.lo.x() = centre.x() - f * (centre.x() - box.lo.x());
    box.hi.x() = centre.x() + f * (box.hi.x() - centre.x());
}

// Shrinks `box` around `centre` until it is disjoint from `other`, using
// the axis along which the centre lies farthest outside `other`.
bool separate_from(Box& box, const Vec2& centre, const Box& other, double gap)
{
    if (separated(box, other, gap)) return true;
    int best = -1;
    double best_slack = 2.0 * gap;
    for (int k = 0; k < 2; ++k) {
        const double slack = std::max(centre[k] - other.hi[k], other.lo[k] - centre[k]);
        if (slack > best_slack) {
            best_slack = slack;
            best = k;
        }
    }
    if (best < 0) return false;
    if (centre[best] > other.hi[best]) box.lo[best] = std::max(box.lo[best], other.hi[best] + 1.5 * gap);
    else box.hi[best] = std::min(box.hi[best], other.lo[best] - 1.5 * gap);
    return separated(box, other, gap);
}

} // namespace

SplitResult split_members(const GroundStructure& ground, std::span<const Vec2> positions,
                          std::span<const double> sizing, double max_length, double min_length, double anisotropy)
{
    SplitResult out;
    const int n_nodes = static_cast<int>(ground.nodes.size());
    std::vector<Box> boxes;
    for (int k = 0; k < n_nodes; ++k) {
        const auto [lo, hi] = node_box(ground, k);
        boxes.push_back({lo, hi});
        out.ground.nodes.push_back(positions[k]);
    }

    for (std::size_t f = 0; f < ground.members.size(); ++f) {
        const auto& m = ground.members[f];
        const Vec2& a = positions[m.node_a];
        const Vec2& b = positions[m.node_b];
        const double L = (b - a).norm();
        bool split = L > max_length;
        Box mid;
        const Vec2 centre = 0.5 * (a + b);
        if (split && 0.5 * L <= min_length) split = false;
        if (split) {
            const Box& A = boxes[m.node_a];
            const Box& B = boxes[m.node_b];
            mid = {0.5 * (A.lo + B.lo), 0.5 * (A.hi + B.hi)};
            cap_x_extent(mid, centre, anisotropy);
            split = separate_from(mid, centre, A, min_length) && separate_from(mid, centre, B, min_length);
            if (split) cap_x_extent(mid, centre, anisotropy);
            if (!split) out.skipped.push_back(static_cast<int>(f));
        }
        if (!split) {
            out.ground.members.push_back(m);
            out.sizing.push_back(sizing[f]);
            continue;
        }
        const int node = static_cast<int>(out.ground.nodes.size());
        out.ground.nodes.push_back(centre);
        boxes.push_back(mid);
        out.ground.members.push_back({m.node_a, node, m.area});
        out.ground.members.push_back({node, m.node_b, m.area});
        out.sizing.push_back(sizing[f]);
        out.sizing.push_back(sizing[f]);
        ++out.split_count;
    }

    for (std::size_t k = 0; k < out.ground.nodes.size(); ++k) {
        const Vec2& p = out.ground.nodes[k];
        const Box& box = boxes[k];
        NodeBounds nb{box.lo.x() - p.x(), box.hi.x() - p.x(), box.lo.y() - p.y(), box.hi.y() - p.y()};
        // positions sit inside their boxes; clamp round-off so bounds bracket 0
        nb.x_min = std::min(nb.x_min, 0.0);
        nb.y_min = std::min(nb.y_min, 0.0);
        nb.x_max = std::max(nb.x_max, 0.0);
        nb.y_max = std::max(nb.y_max, 0.0);
        out.ground.bounds.push_back(nb);
    }
    return out;
}

} // namespace rcto
