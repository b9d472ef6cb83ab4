#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcto/domain.hpp"
#include "rcto/optimizer.hpp"

namespace rcto {

inline constexpr int kBundleSchema = 1;

struct InnerTraceRow
{
    int outer = 0;
    int iteration = 0;
    double compliance = 0.0;
    int switched = 0;
    double ratio = 0.0;
};

/// Everything written by `optimize`. `config` is the normalized JSON of the
/// problem as given (before any member splits).
struct ExportBundle
{
    std::string config;
    Mode mode = Mode::Binary;
    Mesh mesh;
    std::vector<double> density;
    std::vector<double> thickness; // VTS only
    std::vector<Vec2> nodes;
    std::vector<TrussMemberSpec> members;
    std::vector<double> sizing;
    std::vector<IterationRecord> history;
    std::vector<InnerTraceRow> inner_trace;
};

ExportBundle make_bundle(const Problem& original, const RunResult& result);

/// 64-bit FNV-1a of a string, used to tag files with their configuration.
std::uint64_t fnv1a(const std::string& text);

void write_density_csv(std::ostream& out, const ExportBundle& b);
void write_nodes_csv(std::ostream& out, const ExportBundle& b);
void write_members_csv(std::ostream& out, const ExportBundle& b);
void write_history_csv(std::ostream& out, const ExportBundle& b);
void write_inner_trace_csv(std::ostream& out, const ExportBundle& b);

/// Legacy ASCII unstructured grid: mesh quads then truss lines. Truss nodes
/// that coincide exactly with a mesh node reuse that point.
void write_vtk(std::ostream& out, const ExportBundle& b);

/// Writes density.csv, truss_nodes.csv, truss_members.csv, history.csv,
/// inner_trace.csv, config.json and design.vtk into `dir` (created if needed).
void write_bundle(const std::string& dir, const ExportBundle& b);

/// Parses a bundle directory back; arrays come back bit-identical.
ExportBundle read_bundle(const std::string& dir);

/// Re-emits the geometry of a bundle: "csv" writes the three geometry CSVs,
/// "vtk" writes design.vtk, both into `out_dir`.
void export_bundle(const std::string& bundle_dir, const std::string& format, const std::string& out_dir);

} // namespace rcto
