#pragma once

#include <string>
#include <vector>

#include "rcto/bimodulus.hpp"
#include "rcto/domain.hpp"
#include "rcto/optimizer.hpp"
#include "rcto/truss.hpp"

namespace testing {

inline std::string config_path(const std::string& name)
{
    return std::string(RCTO_CONFIG_DIR) + "/" + name;
}

/// Uniform element scale and member scale at the initial node positions.
inline rcto::PhysicalDesign uniform_design(const rcto::Problem& p, double element_scale, double member_scale)
{
    rcto::PhysicalDesign d;
    d.element_scale.assign(p.mesh.element_count(), element_scale);
    d.member_scale.assign(p.ground.members.size(), member_scale);
    d.node_positions = p.ground.nodes;
    return d;
}

inline rcto::SpreadMap spread_for(const rcto::Problem& p, const rcto::PhysicalDesign& d)
{
    return rcto::build_spread_map(p.mesh, d.node_positions, p.config.ssm_radius);
}

} // namespace testing
