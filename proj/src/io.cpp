#include "rcto/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcto/errors.hpp"

namespace rcto {

namespace fs = std::filesystem;

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string compact(const std::string& config)
{
    return nlohmann::json::parse(config).dump();
}

void header(std::ostream& out, const ExportBundle& b, const char* columns)
{
    out << "# rcto-bundle " << kBundleSchema << "\n";
    out << "# mode " << to_string(b.mode) << "\n";
    out << "# config " << compact(b.config) << "\n";
    out << columns << "\n";
}

struct Table
{
    Mode mode = Mode::Binary;
    bool has_mode = false;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Table read_table(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path.string());
    Table t;
    std::string line;
    bool schema = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# rcto-bundle ", 0) == 0) {
                if (std::stoi(line.substr(14)) != kBundleSchema)
                    throw Error("io", path.string() + ": unsupported bundle schema");
                schema = true;
            } else if (line.rfind("# mode ", 0) == 0) {
                t.mode = line.substr(7) == "vts" ? Mode::Vts : Mode::Binary;
                t.has_mode = true;
            }
            continue;
        }
        if (t.columns.empty()) {
            t.columns = split(line);
            continue;
        }
        auto row = split(line);
        if (row.size() != t.columns.size())
            throw Error("io", path.string() + ": row with " + std::to_string(row.size()) + " fields, expected " +
                                  std::to_string(t.columns.size()));
        t.rows.push_back(std::move(row));
    }
    if (!schema) throw Error("io", path.string() + ": missing rcto-bundle header");
    return t;
}

double to_double(const std::string& s)
{
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw Error("io", "malformed number '" + s + "'");
    return v;
}

int to_int(const std::string& s)
{
    return static_cast<int>(std::lround(to_double(s)));
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + path.string());
    out << content;
    if (!out) throw Error("io", "write failed for " + path.string());
}

template <typename F>
std::string render(F&& f)
{
    std::ostringstream ss;
    f(ss);
    return ss.str();
}

} // namespace

std::uint64_t fnv1a(const std::string& text)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ExportBundle make_bundle(const Problem& original, const RunResult& r)
{
    ExportBundle b;
    b.config = normalize(original);
    b.mode = original.config.mode;
    b.mesh = original.mesh;
    b.density = r.density;
    if (r.thickness) b.thickness = r.thickness->thickness;
    b.nodes = r.positions;
    b.members = r.problem.ground.members;
    b.sizing = r.design.x_t;
    b.history = r.history;
    for (std::size_t k = 0; k < r.inner_reports.size(); ++k) {
        const auto& rep = r.inner_reports[k];
        for (std::size_t i = 0; i < rep.trace.size(); ++i)
            b.inner_trace.push_back({static_cast<int>(k) + 1, static_cast<int>(i) + 1, rep.trace[i],
                                     rep.switched[i], rep.ratios[i]});
    }
    return b;
}

void write_density_csv(std::ostream& out, const ExportBundle& b)
{
    const bool vts = b.mode == Mode::Vts;
    header(out, b, vts ? "element,i,j,density,thickness" : "element,i,j,density");
    for (std::size_t e = 0; e < b.density.size(); ++e) {
        const int i = static_cast<int>(e) / b.mesh.ny, j = static_cast<int>(e) % b.mesh.ny;
        out << e << ',' << i << ',' << j << ',' << num(b.density[e]);
        if (vts) out << ',' << num(b.thickness[e]);
        out << '\n';
    }
}

void write_nodes_csv(std::ostream& out, const ExportBundle& b)
{
    header(out, b, "node,x,y");
    for (std::size_t n = 0; n < b.nodes.size(); ++n)
        out << n << ',' << num(b.nodes[n].x()) << ',' << num(b.nodes[n].y()) << '\n';
}

void write_members_csv(std::ostream& out, const ExportBundle& b)
{
    header(out, b, "member,node_a,node_b,area,x_t,length");
    for (std::size_t f = 0; f < b.members.size(); ++f) {
        const auto& m = b.members[f];
        out << f << ',' << m.node_a << ',' << m.node_b << ',' << num(m.area) << ',' << num(b.sizing[f]) << ','
            << num((b.nodes[m.node_b] - b.nodes[m.node_a]).norm()) << '\n';
    }
}

void write_history_csv(std::ostream& out, const ExportBundle& b)
{
    header(out, b,
           "iteration,compliance,concrete_fraction,steel_fraction,max_change,inner_iterations,ratio,beta,"
           "split_count,kkt");
    for (const auto& r : b.history) {
        out << r.iteration << ',' << num(r.compliance) << ',' << num(r.concrete_fraction) << ','
            << num(r.steel_fraction) << ',' << num(r.max_change) << ',' << r.inner_iterations << ','
            << num(r.ratio) << ',' << num(r.beta) << ',' << r.split_count << ',' << num(r.kkt) << '\n';
    }
}

void write_inner_trace_csv(std::ostream& out, const ExportBundle& b)
{
    header(out, b, "outer,iteration,compliance,switched,ratio");
    for (const auto& r : b.inner_trace)
        out << r.outer << ',' << r.iteration << ',' << num(r.compliance) << ',' << r.switched << ','
            << num(r.ratio) << '\n';
}

void write_vtk(std::ostream& out, const ExportBundle& b)
{
    const Mesh& mesh = b.mesh;
    const int nmesh = mesh.node_count();
    std::vector<int> point_of(b.nodes.size());
    std::vector<Vec2> extra;
    for (std::size_t n = 0; n < b.nodes.size(); ++n) {
        const Vec2 q = (b.nodes[n] - mesh.origin) / mesh.element_size;
        const long i = std::lround(q.x()), j = std::lround(q.y());
        if (i >= 0 && j >= 0 && i <= mesh.nx && j <= mesh.ny) {
            const int id = mesh.node_id(static_cast<int>(i), static_cast<int>(j));
            if (mesh.node_coords(id) == b.nodes[n]) {
                point_of[n] = id;
                continue;
            }
        }
        point_of[n] = nmesh + static_cast<int>(extra.size());
        extra.push_back(b.nodes[n]);
    }

    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(compact(b.config))));
    out << "# vtk DataFile Version 3.0\n";
    out << "rcto-bundle " << kBundleSchema << " mode " << to_string(b.mode) << " config-fnv1a " << hash << "\n";
    out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << nmesh + extra.size() << " double\n";
    for (int n = 0; n < nmesh; ++n) {
        const Vec2 p = mesh.node_coords(n);
        out << num(p.x()) << ' ' << num(p.y()) << " 0\n";
    }
    for (const Vec2& p : extra) out << num(p.x()) << ' ' << num(p.y()) << " 0\n";

    const std::size_t ne = static_cast<std::size_t>(mesh.element_count());
    const std::size_t nm = b.members.size();
    const std::size_t cells = ne + nm;
    out << "CELLS " << cells << ' ' << 5 * ne + 3 * nm << "\n";
    for (std::size_t e = 0; e < ne; ++e) {
        const auto n = mesh.element_nodes(static_cast<int>(e));
        out << "4 " << n[0] << ' ' << n[1] << ' ' << n[2] << ' ' << n[3] << '\n';
    }
    for (const auto& m : b.members) out << "2 " << point_of[m.node_a] << ' ' << point_of[m.node_b] << '\n';
    out << "CELL_TYPES " << cells << "\n";
    for (std::size_t e = 0; e < ne; ++e) out << "9\n";
    for (std::size_t f = 0; f < nm; ++f) out << "3\n";

    auto scalars = [&](const char* name, auto&& quad, auto&& line) {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (std::size_t e = 0; e < ne; ++e) out << num(quad(e)) << '\n';
        for (std::size_t f = 0; f < nm; ++f) out << num(line(f)) << '\n';
    };
    out << "CELL_DATA " << cells << "\n";
    scalars("density", [&](std::size_t e) { return b.density[e]; }, [](std::size_t) { return 0.0; });
    scalars("member_size", [](std::size_t) { return 0.0; }, [&](std::size_t f) { return b.sizing[f]; });
    scalars("member_area", [](std::size_t) { return 0.0; },
            [&](std::size_t f) { return b.sizing[f] * b.members[f].area; });
    if (b.mode == Mode::Vts)
        scalars("thickness", [&](std::size_t e) { return b.thickness[e]; }, [](std::size_t) { return 0.0; });
}

void write_bundle(const std::string& dir, const ExportBundle& b)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("io", "cannot create " + dir + ": " + ec.message());
    const fs::path d(dir);
    write_file(d / "density.csv", render([&](std::ostream& o) { write_density_csv(o, b); }));
    write_file(d / "truss_nodes.csv", render([&](std::ostream& o) { write_nodes_csv(o, b); }));
    write_file(d / "truss_members.csv", render([&](std::ostream& o) { write_members_csv(o, b); }));
    write_file(d / "history.csv", render([&](std::ostream& o) { write_history_csv(o, b); }));
    write_file(d / "inner_trace.csv", render([&](std::ostream& o) { write_inner_trace_csv(o, b); }));
    write_file(d / "config.json", b.config + "\n");
    write_file(d / "design.vtk", render([&](std::ostream& o) { write_vtk(o, b); }));
}

ExportBundle read_bundle(const std::string& dir)
{
    const fs::path d(dir);
    ExportBundle b;
    b.config = read_file(d / "config.json");
    while (!b.config.empty() && b.config.back() == '\n') b.config.pop_back();
    const Problem p = build_problem(b.config);
    b.mesh = p.mesh;
    b.mode = p.config.mode;

    const Table dens = read_table(d / "density.csv");
    if (dens.rows.size() != static_cast<std::size_t>(b.mesh.element_count()))
        throw Error("io", "density.csv does not match the mesh");
    for (const auto& r : dens.rows) {
        b.density.push_back(to_double(r[3]));
        if (b.mode == Mode::Vts) b.thickness.push_back(to_double(r.at(4)));
    }
    for (const auto& r : read_table(d / "truss_nodes.csv").rows) b.nodes.emplace_back(to_double(r[1]), to_double(r[2]));
    for (const auto& r : read_table(d / "truss_members.csv").rows) {
        b.members.push_back({to_int(r[1]), to_int(r[2]), to_double(r[3])});
        b.sizing.push_back(to_double(r[4]));
    }
    for (const auto& r : read_table(d / "history.csv").rows) {
        IterationRecord h;
        h.iteration = to_int(r[0]);
        h.compliance = to_double(r[1]);
        h.concrete_fraction = to_double(r[2]);
        h.steel_fraction = to_double(r[3]);
        h.max_change = to_double(r[4]);
        h.inner_iterations = to_int(r[5]);
        h.ratio = to_double(r[6]);
        h.beta = to_double(r[7]);
        h.split_count = to_int(r[8]);
        h.kkt = to_double(r[9]);
        b.history.push_back(h);
    }
    for (const auto& r : read_table(d / "inner_trace.csv").rows)
        b.inner_trace.push_back({to_int(r[0]), to_int(r[1]), to_double(r[2]), to_int(r[3]), to_double(r[4])});
    for (const auto& m : b.members) {
        if (m.node_a < 0 || m.node_b < 0 || m.node_a >= static_cast<int>(b.nodes.size()) ||
            m.node_b >= static_cast<int>(b.nodes.size()))
            throw Error("io", "truss_members.csv references a missing node");
    }
    return b;
}

void export_bundle(const std::string& bundle_dir, const std::string& format, const std::string& out_dir)
{
    const ExportBundle b = read_bundle(bundle_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("io", "cannot create " + out_dir + ": " + ec.message());
    const fs::path d(out_dir);
    if (format == "csv") {
        write_file(d / "density.csv", render([&](std::ostream& o) { write_density_csv(o, b); }));
        write_file(d / "truss_nodes.csv", render([&](std::ostream& o) { write_nodes_csv(o, b); }));
        write_file(d / "truss_members.csv", render([&](std::ostream& o) { write_members_csv(o, b); }));
    } else if (format == "vtk") {
        write_file(d / "design.vtk", render([&](std::ostream& o) { write_vtk(o, b); }));
    } else {
        throw Error("usage", "unknown export format '" + format + "' (expected csv or vtk)");
    }
}

} // namespace rcto
