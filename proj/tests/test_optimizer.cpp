#include <doctest.h>

#include <cmath>
#include <vector>

#include "common.hpp"
#include "rcto/errors.hpp"
#include "rcto/optimizer.hpp"

using namespace rcto;

TEST_CASE("SIMP scale and derivative")
{
    CHECK(simp_stiffness_scale(1.0, 3.0) == doctest::Approx(1.0));
    CHECK(simp_stiffness_scale(0.0, 3.0) == doctest::Approx(1e-9));
    CHECK(simp_stiffness_scale(0.5, 3.0) == doctest::Approx(1e-9 + 0.125 * (1 - 1e-9)));
    for (double r : {0.1, 0.5, 0.9}) {
        const double fd = (simp_stiffness_scale(r + 1e-6, 3.0) - simp_stiffness_scale(r - 1e-6, 3.0)) / 2e-6;
        CHECK(simp_stiffness_derivative(r, 3.0) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("minimum-thickness penalty: half value at m, monotone, saturated at one")
{
    for (double m = 0.05; m < 1.0; m += 0.05) {
        for (double c : {0.5, 1.0, 5.0, 20.0, 50.0, 100.0, 200.0}) {
            CHECK(vts_thickness_penalty(m, m, c) == m / 2);
            double prev = vts_thickness_penalty(0.0, m, c);
            CHECK(prev == 0.0);
            for (int k = 1; k <= 1000; ++k) {
                const double v = vts_thickness_penalty(k / 1000.0, m, c);
                CHECK(v >= prev);
                prev = v;
            }
            if (c >= 20.0 && m <= 0.5) CHECK(vts_thickness_penalty(1.0, m, c) >= 0.999);
            for (double x : {0.1, m, 0.7}) {
                const double fd = (vts_thickness_penalty(x + 1e-7, m, c) - vts_thickness_penalty(x - 1e-7, m, c)) / 2e-7;
                CHECK(vts_thickness_derivative(x, m, c) == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
            }
        }
    }
}

TEST_CASE("penalization modes")
{
    RunConfig cfg;
    cfg.mode = Mode::Binary;
    const Penalization bin(cfg);
    CHECK(bin.member(0.4) == doctest::Approx(0.4));
    CHECK(bin.member_derivative(0.4) == 1.0);
    CHECK(bin.element(0.5) == doctest::Approx(simp_stiffness_scale(0.5, 3.0)));

    cfg.mode = Mode::Vts;
    const Penalization vts(cfg);
    CHECK(vts.member(0.3) == doctest::Approx(vts_thickness_penalty(0.3, 0.3, 20.0)));
    CHECK(vts.element(1.0) == doctest::Approx(1e-9 + (1 - 1e-9) * vts_thickness_penalty(1.0, 0.3, 20.0)));
}

TEST_CASE("non-discreteness and VTS interpretation")
{
    CHECK(non_discreteness(std::vector<double>{0.0, 1.0, 1.0, 0.0}) == 0.0);
    CHECK(non_discreteness(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0));
    const auto f = interpret_vts(std::vector<double>{0.0, 0.3, 1.0}, 7.5, 0.3, 20.0, 0.05);
    REQUIRE(f.thickness.size() == 3);
    CHECK(f.thickness[0] == 0.0);
    CHECK(f.thickness[1] == doctest::Approx(7.5 * 0.3));
    CHECK(f.thickness[2] == 7.5);
    CHECK(f.sub_minimum[0]);
    CHECK_FALSE(f.sub_minimum[1]);
}

TEST_CASE("analytic gradients agree with finite differences on the small cantilever")
{
    const Problem p = load_problem(testing::config_path("tiny.cfg"));
    const GradientReport rep = check_gradients(p);
    REQUIRE(rep.families.size() == 3);
    for (const auto& fam : rep.families) {
        INFO(fam.name);
        CHECK(fam.count > 0);
        CHECK(fam.max_rel_error < 1e-4);
        // V shape: the error grows away from the best step on both sides
        REQUIRE(fam.sweep.size() >= 5);
        CHECK(fam.sweep.front().second > 10 * fam.max_rel_error);
        CHECK(fam.sweep.back().second > 10 * fam.max_rel_error);
    }
}

TEST_CASE("design vector size mismatch is rejected")
{
    Optimizer opt(load_problem(testing::config_path("tiny.cfg")));
    DesignVector d = opt.design();
    d.x_c.pop_back();
    CHECK_THROWS_AS(opt.set_design(d), Error);
}

TEST_CASE("outer iterations reduce compliance and stay feasible")
{
    Problem p = load_problem(testing::config_path("tiny.cfg"));
    p.config.bimodulus.enabled = false; // keep the objective fixed across iterations
    Optimizer opt(p);
    for (int k = 0; k < 12; ++k) opt.step();
    const auto& h = opt.history();
    CHECK(h.back().compliance < h.front().compliance);
    for (const auto& r : h) {
        CHECK(r.concrete_fraction <= 1.0 + 1e-6);
        CHECK(r.steel_fraction <= 1.0 + 1e-6);
    }
}

TEST_CASE("full concrete budget drives the densities to one")
{
    Problem p = load_problem(testing::config_path("tiny.cfg"));
    p.config.concrete_max = total_envelope_volume(p.mesh, p.config.thickness);
    p.config.optimizer.max_iters = 60;
    Optimizer opt(p);
    const RunResult res = opt.run();
    double lo = 1.0;
    for (double r : res.density) lo = std::min(lo, r);
    CHECK(lo > 0.95);
}

TEST_CASE("2 x 2 mesh without truss runs to completion")
{
    const Problem p = build_problem(R"({
      "mesh": {"nx": 2, "ny": 2},
      "supports": [{"at": "left-edge", "fix": "xy"}],
      "loads": [{"at": "right-mid", "fy": -1}],
      "volume": {"concrete_fraction": 0.5},
      "optimizer": {"max_iters": 20}
    })");
    Optimizer opt(p);
    const RunResult res = opt.run();
    CHECK(res.density.size() == 4);
    CHECK(!res.history.empty());
    CHECK(res.history.size() <= 20);
    for (const auto& r : res.history) CHECK(r.concrete_fraction <= 1.0 + 1e-6);
}
