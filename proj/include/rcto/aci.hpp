#pragma once

#include <string>
#include <string_view>

namespace rcto {

/// Rectangular singly reinforced section in N / mm units.
struct SectionSpec
{
    std::string name;
    double width = 0.0;          // b, mm
    double depth = 0.0;          // effective depth d, mm
    double steel_area = 0.0;     // A_s, mm^2
    double yield_strength = 0.0; // f_y, MPa
    double concrete_strength = 0.0; // f'_c, MPa
    double span = 0.0;           // L, mm
};

/// Depth of the equivalent rectangular stress block, A_s f_y / (0.85 f'_c b).
double stress_block_depth(const SectionSpec& s);

/// A_s f_y (d - a/2) in N mm. Throws Error("over-reinforced") when a >= d
/// and ConfigError for non-positive dimensions or strengths.
double nominal_moment(const SectionSpec& s);

/// Mid-span load of a simply supported beam at nominal capacity, 4 M_n / L, in N.
double three_point_design_load(const SectionSpec& s);

/// Section file: JSON object with width_mm, effective_depth_mm,
/// steel_area_mm2, fy_mpa, fc_mpa, span_mm and an optional name.
SectionSpec parse_section(std::string_view document);
SectionSpec load_section(const std::string& path);

} // namespace rcto
