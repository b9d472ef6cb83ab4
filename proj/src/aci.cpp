#include "rcto/aci.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcto/errors.hpp"

namespace rcto {

namespace {

void check_positive(double v, const char* field)
{
    if (!(v > 0.0)) throw ConfigError(field, "must be positive");
}

void check(const SectionSpec& s)
{
    check_positive(s.width, "width_mm");
    check_positive(s.depth, "effective_depth_mm");
    check_positive(s.yield_strength, "fy_mpa");
    check_positive(s.concrete_strength, "fc_mpa");
    check_positive(s.span, "span_mm");
    if (s.steel_area < 0.0) throw ConfigError("steel_area_mm2", "must be non-negative");
}

} // namespace

double stress_block_depth(const SectionSpec& s)
{
    return s.steel_area * s.yield_strength / (0.85 * s.concrete_strength * s.width);
}

double nominal_moment(const SectionSpec& s)
{
    check(s);
    const double a = stress_block_depth(s);
    if (a >= s.depth)
        throw Error("over-reinforced", "stress block depth " + std::to_string(a) + " mm reaches the effective depth");
    return s.steel_area * s.yield_strength * (s.depth - 0.5 * a);
}

double three_point_design_load(const SectionSpec& s)
{
    return 4.0 * nominal_moment(s) / s.span;
}

SectionSpec parse_section(std::string_view document)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(document, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", e.what());
    }
    if (!j.is_object()) throw ConfigError("", "section file must hold a JSON object");
    static const char* keys[] = {"name", "width_mm", "effective_depth_mm", "steel_area_mm2",
                                 "fy_mpa", "fc_mpa", "span_mm"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ConfigError(it.key(), "unknown key");
    }
    auto num = [&](const char* key) {
        if (!j.contains(key)) throw ConfigError(key, "missing");
        if (!j[key].is_number()) throw ConfigError(key, "expected a number");
        return j[key].get<double>();
    };
    SectionSpec s;
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ConfigError("name", "expected a string");
        s.name = j["name"].get<std::string>();
    }
    s.width = num("width_mm");
    s.depth = num("effective_depth_mm");
    s.steel_area = num("steel_area_mm2");
    s.yield_strength = num("fy_mpa");
    s.concrete_strength = num("fc_mpa");
    s.span = num("span_mm");
    check(s);
    return s;
}

SectionSpec load_section(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_section(ss.str());
}

} // namespace rcto
