#include <doctest.h>

#include <string>

#include "common.hpp"
#include "rcto/domain.hpp"
#include "rcto/errors.hpp"

using namespace rcto;

namespace {

std::string with(const std::string& extra)
{
    return R"({"mesh": {"nx": 4, "ny": 2}, "supports": [{"at": "left-edge", "fix": "xy"}],
              "loads": [{"at": "right-mid", "fy": -1}], "volume": {"concrete_fraction": 0.5})" +
           extra + "}";
}

template <typename E>
std::string kind_of(const std::string& doc)
{
    try {
        build_problem(doc);
    } catch (const E& e) {
        return e.kind();
    }
    return "none";
}

} // namespace

TEST_CASE("shipped configs validate")
{
    for (const char* name : {"tiny.cfg", "beam.cfg", "mbb.cfg", "specimen_binary.cfg", "specimen_vts.cfg"}) {
        INFO(name);
        CHECK_NOTHROW(validate(load_problem(testing::config_path(name))));
    }
}

TEST_CASE("anchors resolve to DOFs")
{
    const Problem p = build_problem(with(""));
    CHECK(p.bc.fixed_dofs.size() == 6);
    REQUIRE(p.bc.point_loads.size() == 1);
    CHECK(p.bc.point_loads[0].dof == 2 * p.mesh.node_id(4, 1) + 1);
    CHECK(p.config.concrete_max == doctest::Approx(4.0));
    CHECK(p.config.mode == Mode::Binary);
}

TEST_CASE("normalized echo rebuilds the same problem")
{
    const Problem a = load_problem(testing::config_path("beam.cfg"));
    const std::string n = normalize(a);
    const Problem b = build_problem(n);
    CHECK(normalize(b) == n);
    CHECK(b.ground.members.size() == a.ground.members.size());
    CHECK(b.bc.fixed_dofs == a.bc.fixed_dofs);
}

TEST_CASE("malformed configurations are rejected")
{
    CHECK(kind_of<ConfigError>("{ not json") == "config");
    CHECK(kind_of<ConfigError>(with(R"(, "colour": 3)")) == "config");
    CHECK(kind_of<ConfigError>(with(R"(, "mode": "hybrid")")) == "config");
    CHECK(kind_of<ConfigError>(with(R"(, "vts": {"m": 1.5})")) == "config");
    CHECK(kind_of<ConfigError>(with(R"(, "vts": {"c": 0})")) == "config");
    CHECK(kind_of<ConfigError>(R"({"mesh": {"nx": 0, "ny": 2}})") == "config");
}

TEST_CASE("structural defects are rejected")
{
    CHECK(kind_of<Error>(R"({"mesh": {"nx": 4, "ny": 2}, "supports": [], "loads": [{"at": "right-mid", "fy": -1}],
                             "volume": {"concrete_fraction": 0.5}})") == "rigid-body");
    CHECK(kind_of<Error>(with(R"(, "ground_structure": {"area": 1, "nodes": [[1, 1], [1, 1]], "members": [[0, 1]]})")) ==
          "zero-length-member");
}

TEST_CASE("config errors name the offending field")
{
    try {
        build_problem(with(R"(, "optimizer": {"max_iters": "many"})"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field().find("max_iters") != std::string::npos);
    }
}
