#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace rcto {

using Vec2 = Eigen::Vector2d;

/// Structured grid of square 4-node plane-stress elements.
///
/// Nodes and elements are numbered column-major with y varying fastest:
/// node (i, j) has id i*(ny+1)+j and element (i, j) has id i*ny+j, with
/// i along x from the left edge and j along y from the bottom edge.
/// Element-local node order is counter-clockwise from the bottom-left
/// corner, and node n owns DOFs 2n (x) and 2n+1 (y).
struct Mesh
{
    int nx = 1;
    int ny = 1;
    double element_size = 1.0;
    Vec2 origin = Vec2::Zero();

    int node_count() const { return (nx + 1) * (ny + 1); }
    int element_count() const { return nx * ny; }
    int dof_count() const { return 2 * node_count(); }

    int node_id(int i, int j) const { return i * (ny + 1) + j; }
    int element_id(int i, int j) const { return i * ny + j; }

    double width() const { return nx * element_size; }
    double height() const { return ny * element_size; }

    Vec2 node_coords(int node) const
    {
        const int i = node / (ny + 1);
        const int j = node % (ny + 1);
        return origin + Vec2(i * element_size, j * element_size);
    }

    Vec2 element_center(int element) const
    {
        const int i = element / ny;
        const int j = element % ny;
        return origin + Vec2((i + 0.5) * element_size, (j + 0.5) * element_size);
    }

    std::array<int, 4> element_nodes(int element) const
    {
        const int i = element / ny;
        const int j = element % ny;
        return {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)};
    }

    std::array<int, 8> element_dofs(int element) const
    {
        const auto n = element_nodes(element);
        return {2 * n[0], 2 * n[0] + 1, 2 * n[1], 2 * n[1] + 1,
                2 * n[2], 2 * n[2] + 1, 2 * n[3], 2 * n[3] + 1};
    }

    bool contains(const Vec2& p) const
    {
        const Vec2 q = p - origin;
        return q.x() >= 0.0 && q.y() >= 0.0 && q.x() <= width() && q.y() <= height();
    }
};

struct PointLoad
{
    int dof = 0;
    double magnitude = 0.0;
};

struct BoundaryConditions
{
    std::vector<int> fixed_dofs; // sorted, unique
    std::vector<PointLoad> point_loads;
};

/// Admissible displacement of a truss node from its initial position.
struct NodeBounds
{
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;
};

struct TrussMemberSpec
{
    int node_a = 0;
    int node_b = 0;
    double area = 1.0;
};

struct GroundStructure
{
    std::vector<Vec2> nodes; // initial positions
    std::vector<TrussMemberSpec> members;
    std::vector<NodeBounds> bounds; // one per node

    bool empty() const { return members.empty(); }
};

enum class Mode { Binary, Vts };

std::string_view to_string(Mode mode);

struct BimodulusParams
{
    bool enabled = true;
    double E_comp = 180.0;
    double E_tens = 4.5;
    double nu_comp = 0.3;
    double nu_tens = 0.0075;
    double truss_E_tens = 5800.0;
    double truss_E_comp = 0.01;
    double ratio_start = 0.3;
    double ratio_step = 0.025;
    double ratio_floor = 0.025;
    double tol = 1e-3;
    int max_iters = 50;
};

struct HeavisideParams
{
    bool enabled = true;
    std::vector<double> beta_schedule{1, 2, 4, 8, 16, 32, 64};
    int interval = 30;
};

struct VtsParams
{
    double m = 0.3;
    double c = 20.0;
    int split_interval = 40;
    double split_max_length = 0.0; // members longer than this get halved
    double anisotropy = 2.0;       // y-freedom / x-freedom of midpoint nodes
    double report_threshold = 0.05;
};

struct OptimizerParams
{
    int max_iters = 300;
    double tol = 0.01;
    double move_continuum = 0.1;
    double move_truss = 0.1;
    double move_nodes = 0.05;
    std::optional<double> initial_density;
};

struct RunConfig
{
    Mode mode = Mode::Binary;
    double thickness = 1.0;
    double concrete_max = 0.0;
    double steel_max = 0.0;
    double simp_penalty = 3.0;
    double density_floor = 1e-9;
    double filter_radius = 0.0;
    double ssm_radius = 0.0;
    double min_member_length = 0.0;
    HeavisideParams heaviside;
    VtsParams vts;
    BimodulusParams bimodulus;
    OptimizerParams optimizer;
};

struct Problem
{
    Mesh mesh;
    BoundaryConditions bc;
    GroundStructure ground;
    RunConfig config;
};

/// Parses and validates a JSON configuration document (comments allowed).
/// Throws ConfigError on malformed input and Error("rigid-body") /
/// Error("zero-length-member") on structural defects.
Problem build_problem(std::string_view document);

/// Reads a configuration file from disk and builds it.
Problem load_problem(const std::string& path);

/// Canonical JSON echo of a problem: every default filled in, anchors
/// resolved to DOF indices, keys sorted. Feeding it back to
/// build_problem reproduces the same problem.
std::string normalize(const Problem& problem, int indent = 2);

/// Re-runs the structural validation checks on an in-memory problem.
void validate(const Problem& problem);

double total_envelope_volume(const Mesh& mesh, double thickness);

/// Absolute admissible box [lo, hi] of a truss node.
std::pair<Vec2, Vec2> node_box(const GroundStructure& ground, int node);

} // namespace rcto
