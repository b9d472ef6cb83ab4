#include "rcto/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/LU>
#include <json.hpp>

#include "rcto/errors.hpp"

namespace rcto {

using nlohmann::json;

std::string_view to_string(Mode mode)
{
    return mode == Mode::Binary ? "binary" : "vts";
}

double total_envelope_volume(const Mesh& mesh, double thickness)
{
    return mesh.nx * mesh.ny * mesh.element_size * mesh.element_size * thickness;
}

std::pair<Vec2, Vec2> node_box(const GroundStructure& ground, int node)
{
    const Vec2& p = ground.nodes[node];
    const NodeBounds& b = ground.bounds[node];
    return {p + Vec2(b.x_min, b.y_min), p + Vec2(b.x_max, b.y_max)};
}

namespace {

// Reads typed, optional fields out of a JSON object and rejects keys that
// were never consumed, so typos in a config surface as errors.
class Reader
{
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_.is_object()) throw ConfigError(path_, "expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

    const json& raw(const std::string& key)
    {
        seen_.insert(key);
        if (!node_.contains(key)) throw ConfigError(field(key), "missing required field");
        return node_.at(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt)
    {
        seen_.insert(key);
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError(field(key), "missing required field");
        }
        const json& v = node_.at(key);
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        return v.get<double>();
    }

    std::optional<double> optional_number(const std::string& key)
    {
        seen_.insert(key);
        if (!has(key)) return std::nullopt;
        const json& v = node_.at(key);
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        return v.get<double>();
    }

    int integer(const std::string& key, std::optional<int> fallback = std::nullopt)
    {
        seen_.insert(key);
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError(field(key), "missing required field");
        }
        const json& v = node_.at(key);
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        return v.get<int>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        seen_.insert(key);
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt)
    {
        seen_.insert(key);
        if (!has(key)) {
            if (fallback) return *fallback;
            throw ConfigError(field(key), "missing required field");
        }
        const json& v = node_.at(key);
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
        return v.get<std::string>();
    }

    void skip(const std::string& key) { seen_.insert(key); }

    std::string field(const std::string& key) const { return path_ + "/" + key; }

    void finish() const
    {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

double as_number(const json& v, const std::string& path)
{
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

int as_integer(const json& v, const std::string& path)
{
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    return v.get<int>();
}

std::pair<double, double> as_range(const json& v, const std::string& path)
{
    if (!v.is_array() || v.size() != 2) throw ConfigError(path, "expected [min, max]");
    return {as_number(v[0], path + "/0"), as_number(v[1], path + "/1")};
}

int line_of_offset(std::string_view text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

// Named anchors resolve to node lists; "mid" picks floor(n/2).
std::vector<int> resolve_anchor(const Mesh& mesh, const std::string& name, const std::string& path)
{
    const int nx = mesh.nx, ny = mesh.ny;
    if (name == "bottom-left") return {mesh.node_id(0, 0)};
    if (name == "bottom-right") return {mesh.node_id(nx, 0)};
    if (name == "top-left") return {mesh.node_id(0, ny)};
    if (name == "top-right") return {mesh.node_id(nx, ny)};
    if (name == "bottom-mid") return {mesh.node_id(nx / 2, 0)};
    if (name == "top-mid") return {mesh.node_id(nx / 2, ny)};
    if (name == "left-mid") return {mesh.node_id(0, ny / 2)};
    if (name == "right-mid") return {mesh.node_id(nx, ny / 2)};
    std::vector<int> nodes;
    if (name == "left-edge" || name == "right-edge") {
        const int i = name == "left-edge" ? 0 : nx;
        for (int j = 0; j <= ny; ++j) nodes.push_back(mesh.node_id(i, j));
        return nodes;
    }
    if (name == "bottom-edge" || name == "top-edge") {
        const int j = name == "bottom-edge" ? 0 : ny;
        for (int i = 0; i <= nx; ++i) nodes.push_back(mesh.node_id(i, j));
        return nodes;
    }
    throw ConfigError(path, "unknown anchor '" + name + "'");
}

std::vector<int> resolve_nodes(Reader& r, const Mesh& mesh, const std::string& path)
{
    int given = 0;
    std::vector<int> nodes;
    if (r.has("at")) {
        ++given;
        nodes = resolve_anchor(mesh, r.string("at"), r.field("at"));
    }
    if (r.has("node")) {
        ++given;
        const int n = r.integer("node");
        if (n < 0 || n >= mesh.node_count()) throw ConfigError(r.field("node"), "node index out of range");
        nodes = {n};
    }
    if (r.has("grid")) {
        ++given;
        const json& g = r.raw("grid");
        if (!g.is_array() || g.size() != 2) throw ConfigError(r.field("grid"), "expected [i, j]");
        const int i = as_integer(g[0], r.field("grid") + "/0");
        const int j = as_integer(g[1], r.field("grid") + "/1");
        if (i < 0 || i > mesh.nx || j < 0 || j > mesh.ny)
            throw ConfigError(r.field("grid"), "grid position out of range");
        nodes = {mesh.node_id(i, j)};
    }
    if (given != 1) throw ConfigError(path, "exactly one of 'at', 'node', 'grid' is required");
    return nodes;
}

void parse_supports(const json& doc, const Mesh& mesh, BoundaryConditions& bc)
{
    if (!doc.is_array()) throw ConfigError("/supports", "expected an array");
    std::set<int> fixed;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const std::string path = "/supports/" + std::to_string(k);
        Reader r(doc[k], path);
        if (r.has("dofs")) {
            const json& dofs = r.raw("dofs");
            if (!dofs.is_array()) throw ConfigError(r.field("dofs"), "expected an array");
            for (std::size_t q = 0; q < dofs.size(); ++q) {
                const int dof = as_integer(dofs[q], r.field("dofs") + "/" + std::to_string(q));
                if (dof < 0 || dof >= mesh.dof_count())
                    throw ConfigError(r.field("dofs"), "DOF index out of range");
                fixed.insert(dof);
            }
            r.finish();
            continue;
        }
        const auto nodes = resolve_nodes(r, mesh, path);
        const std::string fix = r.string("fix");
        if (fix != "x" && fix != "y" && fix != "xy") throw ConfigError(r.field("fix"), "expected x, y or xy");
        for (int n : nodes) {
            if (fix.find('x') != std::string::npos) fixed.insert(2 * n);
            if (fix.find('y') != std::string::npos) fixed.insert(2 * n + 1);
        }
        r.finish();
    }
    bc.fixed_dofs.assign(fixed.begin(), fixed.end());
}

void parse_loads(const json& doc, const Mesh& mesh, BoundaryConditions& bc)
{
    if (!doc.is_array()) throw ConfigError("/loads", "expected an array");
    for (std::size_t k = 0; k < doc.size(); ++k) {
        const std::string path = "/loads/" + std::to_string(k);
        Reader r(doc[k], path);
        if (r.has("dof")) {
            const int dof = r.integer("dof");
            if (dof < 0 || dof >= mesh.dof_count()) throw ConfigError(r.field("dof"), "DOF index out of range");
            bc.point_loads.push_back({dof, r.number("value")});
            r.finish();
            continue;
        }
        const auto nodes = resolve_nodes(r, mesh, path);
        if (nodes.size() != 1) throw ConfigError(path, "loads must target a single node (no distributed loads)");
        const double fx = r.number("fx", 0.0);
        const double fy = r.number("fy", 0.0);
        if (fx != 0.0) bc.point_loads.push_back({2 * nodes[0], fx});
        if (fy != 0.0) bc.point_loads.push_back({2 * nodes[0] + 1, fy});
        r.finish();
    }
}

NodeBounds clip_to_envelope(const Mesh& mesh, const Vec2& p, NodeBounds b)
{
    const Vec2 lo = mesh.origin;
    const Vec2 hi = mesh.origin + Vec2(mesh.width(), mesh.height());
    b.x_min = std::max(b.x_min, lo.x() - p.x());
    b.x_max = std::min(b.x_max, hi.x() - p.x());
    b.y_min = std::max(b.y_min, lo.y() - p.y());
    b.y_max = std::min(b.y_max, hi.y() - p.y());
    return b;
}

NodeBounds parse_bounds(Reader& r)
{
    NodeBounds b;
    if (r.has("x")) std::tie(b.x_min, b.x_max) = as_range(r.raw("x"), r.field("x"));
    if (r.has("y")) std::tie(b.y_min, b.y_max) = as_range(r.raw("y"), r.field("y"));
    return b;
}

void generate_grid(Reader& g, GroundStructure& ground, double area)
{
    const int cols = g.integer("columns");
    const int rows = g.integer("rows", 1);
    if (cols < 1 || rows < 1 || cols * rows < 2) throw ConfigError(g.field("columns"), "grid needs at least two nodes");
    const auto [x0, x1] = as_range(g.raw("x"), g.field("x"));
    const auto [y0, y1] = as_range(g.raw("y"), g.field("y"));
    int level = 1;
    if (g.has("level")) {
        const json& lv = g.raw("level");
        if (lv.is_string() && lv.get<std::string>() == "full") level = std::max(cols, rows);
        else level = as_integer(lv, g.field("level"));
    }
    if (level < 1) throw ConfigError(g.field("level"), "level must be >= 1 or \"full\"");
    g.finish();

    auto coord = [](double a, double b, int k, int n) { return n == 1 ? a : a + (b - a) * k / (n - 1); };
    const int base = static_cast<int>(ground.nodes.size());
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) ground.nodes.emplace_back(coord(x0, x1, c, cols), coord(y0, y1, r, rows));
    const int count = cols * rows;
    for (int a = 0; a < count; ++a) {
        for (int b = a + 1; b < count; ++b) {
            const int dc = std::abs(b / rows - a / rows);
            const int dr = std::abs(b % rows - a % rows);
            // skip members that would overlap a shorter collinear one
            if (std::max(dc, dr) > level || std::gcd(dc, dr) != 1) continue;
            ground.members.push_back({base + a, base + b, area});
        }
    }
}

void parse_ground(const json& doc, const Mesh& mesh, GroundStructure& ground)
{
    Reader r(doc, "/ground_structure");
    const double area = r.number("area", 1.0);
    if (r.has("nodes")) {
        const json& nodes = r.raw("nodes");
        if (!nodes.is_array()) throw ConfigError(r.field("nodes"), "expected an array");
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const std::string path = r.field("nodes") + "/" + std::to_string(k);
            if (!nodes[k].is_array() || nodes[k].size() != 2) throw ConfigError(path, "expected [x, y]");
            ground.nodes.emplace_back(as_number(nodes[k][0], path), as_number(nodes[k][1], path));
        }
    }
    if (r.has("members")) {
        const json& members = r.raw("members");
        if (!members.is_array()) throw ConfigError(r.field("members"), "expected an array");
        for (std::size_t k = 0; k < members.size(); ++k) {
            const std::string path = r.field("members") + "/" + std::to_string(k);
            const json& m = members[k];
            TrussMemberSpec spec{0, 0, area};
            const json* ends = &m;
            if (m.is_object()) {
                Reader mr(m, path);
                ends = &mr.raw("nodes");
                spec.area = mr.number("area", area);
                mr.finish();
            }
            if (!ends->is_array() || ends->size() != 2) throw ConfigError(path, "expected [node_a, node_b]");
            spec.node_a = as_integer((*ends)[0], path);
            spec.node_b = as_integer((*ends)[1], path);
            ground.members.push_back(spec);
        }
    }
    if (r.has("grid")) {
        Reader g(r.raw("grid"), r.field("grid"));
        generate_grid(g, ground, area);
    }

    NodeBounds defaults;
    if (r.has("bounds")) {
        Reader br(r.raw("bounds"), r.field("bounds"));
        defaults = parse_bounds(br);
        br.finish();
    }
    ground.bounds.clear();
    for (const Vec2& p : ground.nodes) ground.bounds.push_back(clip_to_envelope(mesh, p, defaults));

    if (r.has("node_bounds")) {
        const json& list = r.raw("node_bounds");
        if (!list.is_array()) throw ConfigError(r.field("node_bounds"), "expected an array");
        for (std::size_t k = 0; k < list.size(); ++k) {
            Reader nb(list[k], r.field("node_bounds") + "/" + std::to_string(k));
            const int node = nb.integer("node");
            if (node < 0 || node >= static_cast<int>(ground.nodes.size()))
                throw ConfigError(nb.field("node"), "node index out of range");
            ground.bounds[node] = clip_to_envelope(mesh, ground.nodes[node], parse_bounds(nb));
            nb.finish();
        }
    }
    r.finish();
}

void parse_params(const json& doc, const Mesh& mesh, RunConfig& cfg, double thickness)
{
    Reader r(doc, "");
    const double h = mesh.element_size;
    const std::string mode = r.string("mode", std::string("binary"));
    if (mode == "binary") cfg.mode = Mode::Binary;
    else if (mode == "vts") cfg.mode = Mode::Vts;
    else throw ConfigError("/mode", "expected binary or vts");
    cfg.thickness = thickness;

    const double envelope = total_envelope_volume(mesh, thickness);
    if (r.has("volume")) {
        Reader v(r.raw("volume"), "/volume");
        if (v.has("concrete_max") && v.has("concrete_fraction"))
            throw ConfigError("/volume", "give concrete_max or concrete_fraction, not both");
        if (v.has("concrete_fraction")) cfg.concrete_max = v.number("concrete_fraction") * envelope;
        else cfg.concrete_max = v.number("concrete_max");
        cfg.steel_max = v.number("steel_max", 0.0);
        v.finish();
    } else {
        throw ConfigError("/volume", "missing required field");
    }

    cfg.simp_penalty = r.number("simp_penalty", 3.0);
    cfg.density_floor = r.number("density_floor", 1e-9);
    cfg.filter_radius = r.number("filter_radius", 2.5 * h);
    cfg.ssm_radius = r.number("ssm_radius", 1.5 * h);
    cfg.min_member_length = r.number("min_member_length", 0.05 * h);

    if (r.has("heaviside")) {
        Reader hv(r.raw("heaviside"), "/heaviside");
        cfg.heaviside.enabled = hv.boolean("enabled", true);
        if (hv.has("beta_schedule")) {
            const json& s = hv.raw("beta_schedule");
            if (!s.is_array() || s.empty()) throw ConfigError(hv.field("beta_schedule"), "expected a non-empty array");
            cfg.heaviside.beta_schedule.clear();
            for (std::size_t k = 0; k < s.size(); ++k)
                cfg.heaviside.beta_schedule.push_back(as_number(s[k], hv.field("beta_schedule")));
        }
        cfg.heaviside.interval = hv.integer("interval", 30);
        hv.finish();
    }

    VtsParams& vts = cfg.vts;
    vts.split_max_length = 2.0 * h;
    if (r.has("vts")) {
        Reader v(r.raw("vts"), "/vts");
        vts.m = v.number("m", vts.m);
        vts.c = v.number("c", vts.c);
        vts.split_interval = v.integer("split_interval", vts.split_interval);
        vts.split_max_length = v.number("split_max_length", vts.split_max_length);
        vts.anisotropy = v.number("anisotropy", vts.anisotropy);
        vts.report_threshold = v.number("report_threshold", vts.report_threshold);
        v.finish();
    }

    BimodulusParams& bm = cfg.bimodulus;
    if (r.has("bimodulus")) {
        Reader b(r.raw("bimodulus"), "/bimodulus");
        bm.enabled = b.boolean("enabled", bm.enabled);
        bm.E_comp = b.number("E_comp", bm.E_comp);
        bm.E_tens = b.number("E_tens", bm.E_tens);
        bm.nu_comp = b.number("nu_comp", bm.nu_comp);
        bm.nu_tens = b.number("nu_tens", bm.nu_tens);
        bm.truss_E_tens = b.number("truss_E_tens", bm.truss_E_tens);
        bm.truss_E_comp = b.number("truss_E_comp", bm.truss_E_comp);
        bm.ratio_start = b.number("ratio_start", bm.ratio_start);
        bm.ratio_step = b.number("ratio_step", bm.ratio_step);
        bm.ratio_floor = b.number("ratio_floor", bm.ratio_floor);
        bm.tol = b.number("tol", bm.tol);
        bm.max_iters = b.integer("max_iters", bm.max_iters);
        b.finish();
    }

    OptimizerParams& op = cfg.optimizer;
    if (r.has("optimizer")) {
        Reader o(r.raw("optimizer"), "/optimizer");
        op.max_iters = o.integer("max_iters", op.max_iters);
        op.tol = o.number("tol", op.tol);
        op.move_continuum = o.number("move_continuum", op.move_continuum);
        op.move_truss = o.number("move_truss", op.move_truss);
        op.move_nodes = o.number("move_nodes", op.move_nodes);
        op.initial_density = o.optional_number("initial_density");
        o.finish();
    }

    // consumed elsewhere
    for (const char* key : {"mesh", "supports", "loads", "ground_structure"}) r.skip(key);
    r.finish();
}

void require(bool ok, const std::string& field, const std::string& message)
{
    if (!ok) throw ConfigError(field, message);
}

void validate_params(const Problem& p)
{
    const RunConfig& c = p.config;
    const double h = p.mesh.element_size;
    const double envelope = total_envelope_volume(p.mesh, c.thickness);
    require(c.concrete_max > 0.0, "/volume/concrete_max", "must be positive");
    require(c.concrete_max <= envelope * (1.0 + 1e-12), "/volume/concrete_max", "exceeds the envelope volume");
    if (!p.ground.members.empty()) require(c.steel_max > 0.0, "/volume/steel_max", "must be positive");
    require(c.simp_penalty >= 1.0, "/simp_penalty", "must be >= 1");
    require(c.density_floor > 0.0 && c.density_floor < 1.0, "/density_floor", "must lie in (0, 1)");
    require(c.filter_radius > 0.0, "/filter_radius", "must be positive");
    require(c.ssm_radius > h * std::sqrt(0.5), "/ssm_radius",
            "must exceed half the element diagonal so every point reaches a mesh node");
    require(c.min_member_length > 0.0, "/min_member_length", "must be positive");

    const auto& hv = c.heaviside;
    require(hv.interval >= 1, "/heaviside/interval", "must be >= 1");
    for (std::size_t k = 0; k < hv.beta_schedule.size(); ++k) {
        require(hv.beta_schedule[k] >= 0.0, "/heaviside/beta_schedule", "beta must be >= 0");
        if (k > 0) require(hv.beta_schedule[k] >= hv.beta_schedule[k - 1], "/heaviside/beta_schedule", "must be non-decreasing");
    }

    const auto& v = c.vts;
    require(v.m > 0.0 && v.m < 1.0, "/vts/m", "must lie in (0, 1)");
    require(v.c > 0.0 && v.c <= 200.0, "/vts/c", "must lie in (0, 200]");
    require(v.split_interval >= 1, "/vts/split_interval", "must be >= 1");
    require(v.split_max_length > 0.0, "/vts/split_max_length", "must be positive");
    require(v.anisotropy >= 1.0, "/vts/anisotropy", "must be >= 1");

    const auto& b = c.bimodulus;
    require(b.E_comp > 0.0 && b.E_tens > 0.0, "/bimodulus/E_comp", "moduli must be positive");
    require(b.truss_E_tens > 0.0 && b.truss_E_comp > 0.0, "/bimodulus/truss_E_tens", "moduli must be positive");
    require(b.nu_comp >= 0.0 && b.nu_comp < 1.0, "/bimodulus/nu_comp", "must lie in [0, 1)");
    require(std::abs(b.E_tens / b.nu_tens - b.E_comp / b.nu_comp) <= 1e-9 * (b.E_comp / b.nu_comp),
            "/bimodulus/nu_tens", "E/nu must be equal in tension and compression");
    require(b.tol > 0.0 && b.tol < 1.0, "/bimodulus/tol", "must lie in (0, 1)");
    require(b.max_iters >= 1, "/bimodulus/max_iters", "must be >= 1");
    require(b.ratio_step > 0.0, "/bimodulus/ratio_step", "must be positive");
    require(b.ratio_floor > 0.0 && b.ratio_floor <= b.ratio_start, "/bimodulus/ratio_floor", "must lie in (0, ratio_start]");
    require(std::abs(b.E_tens / b.E_comp - b.ratio_floor) <= 1e-9, "/bimodulus/ratio_floor",
            "must equal E_tens / E_comp");

    const auto& o = c.optimizer;
    require(o.max_iters >= 1, "/optimizer/max_iters", "must be >= 1");
    require(o.tol > 0.0, "/optimizer/tol", "must be positive");
    for (double m : {o.move_continuum, o.move_truss, o.move_nodes})
        require(m > 0.0 && m <= 1.0, "/optimizer", "move limits must lie in (0, 1]");
    if (o.initial_density) require(*o.initial_density >= 0.0 && *o.initial_density <= 1.0, "/optimizer/initial_density", "must lie in [0, 1]");
}

bool boxes_separated(const GroundStructure& g, int a, int b, double gap)
{
    const auto [alo, ahi] = node_box(g, a);
    const auto [blo, bhi] = node_box(g, b);
    for (int k = 0; k < 2; ++k) {
        if (blo[k] - ahi[k] > gap || alo[k] - bhi[k] > gap) return true;
    }
    return false;
}

} // namespace

void validate(const Problem& p)
{
    const Mesh& m = p.mesh;
    require(m.nx >= 1 && m.ny >= 1, "/mesh", "nx and ny must be >= 1");
    require(m.element_size > 0.0, "/mesh/element_size", "must be positive");
    require(p.config.thickness > 0.0, "/mesh/thickness", "must be positive");

    const auto& bc = p.bc;
    for (int dof : bc.fixed_dofs) require(dof >= 0 && dof < m.dof_count(), "/supports", "DOF index out of range");
    if (bc.fixed_dofs.empty()) throw Error("rigid-body", "rigid body motion: no fixed DOFs");
    // rigid modes (tx, ty, rotation) sampled at the fixed DOFs must have rank 3
    Eigen::MatrixXd modes(bc.fixed_dofs.size(), 3);
    const Vec2 centre = m.origin + 0.5 * Vec2(m.width(), m.height());
    for (std::size_t k = 0; k < bc.fixed_dofs.size(); ++k) {
        const int dof = bc.fixed_dofs[k];
        const Vec2 x = m.node_coords(dof / 2) - centre;
        if (dof % 2 == 0) modes.row(k) << 1.0, 0.0, -x.y();
        else modes.row(k) << 0.0, 1.0, x.x();
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(modes);
    lu.setThreshold(1e-10);
    if (lu.rank() < 3)
        throw Error("rigid-body", "rigid body motion: supports leave " + std::to_string(3 - lu.rank()) +
                                      " rigid mode(s) unrestrained");
    for (const auto& load : bc.point_loads) {
        require(load.dof >= 0 && load.dof < m.dof_count(), "/loads", "DOF index out of range");
        require(!std::binary_search(bc.fixed_dofs.begin(), bc.fixed_dofs.end(), load.dof), "/loads",
                "load applied to fixed DOF " + std::to_string(load.dof));
    }

    const auto& g = p.ground;
    require(g.bounds.size() == g.nodes.size(), "/ground_structure", "one bounds entry per node required");
    const int n_nodes = static_cast<int>(g.nodes.size());
    for (int k = 0; k < n_nodes; ++k) {
        const auto& b = g.bounds[k];
        const std::string path = "/ground_structure/node_bounds/" + std::to_string(k);
        require(b.x_min <= 0.0 && b.x_max >= 0.0 && b.y_min <= 0.0 && b.y_max >= 0.0, path,
                "bounds must contain the initial position");
        const auto [lo, hi] = node_box(g, k);
        const double slack = 1e-12 * std::max(m.width(), m.height());
        require(m.contains(lo - Vec2(-slack, -slack)) && m.contains(hi - Vec2(slack, slack)), path,
                "admissible box leaves the design envelope");
    }
    for (std::size_t k = 0; k < g.members.size(); ++k) {
        const auto& mem = g.members[k];
        const std::string path = "/ground_structure/members/" + std::to_string(k);
        require(mem.node_a >= 0 && mem.node_a < n_nodes && mem.node_b >= 0 && mem.node_b < n_nodes, path,
                "node index out of range");
        require(mem.area > 0.0, path, "area must be positive");
        if (mem.node_a == mem.node_b || !boxes_separated(g, mem.node_a, mem.node_b, p.config.min_member_length))
            throw Error("zero-length-member", "member " + std::to_string(k) +
                                                  " can reach zero length within its node bounds");
    }
    validate_params(p);
}

Problem build_problem(std::string_view document)
{
    json doc;
    try {
        doc = json::parse(document.begin(), document.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("", e.what(), line_of_offset(document, e.byte > 0 ? e.byte - 1 : 0));
    }
    if (!doc.is_object()) throw ConfigError("", "top level must be an object");

    Problem p;
    Reader root(doc, "");
    Reader mr(root.raw("mesh"), "/mesh");
    p.mesh.nx = mr.integer("nx");
    p.mesh.ny = mr.integer("ny");
    p.mesh.element_size = mr.number("element_size", 1.0);
    const double thickness = mr.number("thickness", 1.0);
    if (mr.has("origin")) {
        const auto [ox, oy] = as_range(mr.raw("origin"), mr.field("origin"));
        p.mesh.origin = Vec2(ox, oy);
    }
    mr.finish();
    require(p.mesh.nx >= 1 && p.mesh.ny >= 1, "/mesh", "nx and ny must be >= 1");
    require(p.mesh.element_size > 0.0, "/mesh/element_size", "must be positive");

    parse_supports(root.has("supports") ? root.raw("supports") : json::array(), p.mesh, p.bc);
    parse_loads(root.has("loads") ? root.raw("loads") : json::array(), p.mesh, p.bc);
    if (root.has("ground_structure")) parse_ground(root.raw("ground_structure"), p.mesh, p.ground);
    parse_params(doc, p.mesh, p.config, thickness);
    validate(p);
    return p;
}

Problem load_problem(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return build_problem(ss.str());
}

std::string normalize(const Problem& p, int indent)
{
    const RunConfig& c = p.config;
    json doc;
    doc["mode"] = std::string(to_string(c.mode));
    doc["mesh"] = {{"nx", p.mesh.nx},
                   {"ny", p.mesh.ny},
                   {"element_size", p.mesh.element_size},
                   {"thickness", c.thickness},
                   {"origin", {p.mesh.origin.x(), p.mesh.origin.y()}}};
    doc["supports"] = json::array({json{{"dofs", p.bc.fixed_dofs}}});
    json loads = json::array();
    for (const auto& l : p.bc.point_loads) loads.push_back({{"dof", l.dof}, {"value", l.magnitude}});
    doc["loads"] = loads;

    json nodes = json::array(), members = json::array(), bounds = json::array();
    for (const Vec2& n : p.ground.nodes) nodes.push_back({n.x(), n.y()});
    for (const auto& m : p.ground.members) members.push_back({{"nodes", {m.node_a, m.node_b}}, {"area", m.area}});
    for (std::size_t k = 0; k < p.ground.bounds.size(); ++k) {
        const auto& b = p.ground.bounds[k];
        bounds.push_back({{"node", k}, {"x", {b.x_min, b.x_max}}, {"y", {b.y_min, b.y_max}}});
    }
    doc["ground_structure"] = {{"nodes", nodes}, {"members", members}, {"node_bounds", bounds}};

    doc["volume"] = {{"concrete_max", c.concrete_max}, {"steel_max", c.steel_max}};
    doc["simp_penalty"] = c.simp_penalty;
    doc["density_floor"] = c.density_floor;
    doc["filter_radius"] = c.filter_radius;
    doc["ssm_radius"] = c.ssm_radius;
    doc["min_member_length"] = c.min_member_length;
    doc["heaviside"] = {{"enabled", c.heaviside.enabled},
                        {"beta_schedule", c.heaviside.beta_schedule},
                        {"interval", c.heaviside.interval}};
    doc["vts"] = {{"m", c.vts.m},
                  {"c", c.vts.c},
                  {"split_interval", c.vts.split_interval},
                  {"split_max_length", c.vts.split_max_length},
                  {"anisotropy", c.vts.anisotropy},
                  {"report_threshold", c.vts.report_threshold}};
    const auto& b = c.bimodulus;
    doc["bimodulus"] = {{"enabled", b.enabled},         {"E_comp", b.E_comp},
                        {"E_tens", b.E_tens},           {"nu_comp", b.nu_comp},
                        {"nu_tens", b.nu_tens},         {"truss_E_tens", b.truss_E_tens},
                        {"truss_E_comp", b.truss_E_comp}, {"ratio_start", b.ratio_start},
                        {"ratio_step", b.ratio_step},   {"ratio_floor", b.ratio_floor},
                        {"tol", b.tol},                 {"max_iters", b.max_iters}};
    const auto& o = c.optimizer;
    doc["optimizer"] = {{"max_iters", o.max_iters},
                        {"tol", o.tol},
                        {"move_continuum", o.move_continuum},
                        {"move_truss", o.move_truss},
                        {"move_nodes", o.move_nodes},
                        {"initial_density", o.initial_density ? json(*o.initial_density) : json(nullptr)}};
    return doc.dump(indent);
}

} // namespace rcto
