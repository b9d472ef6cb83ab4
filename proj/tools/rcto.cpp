#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rcto/aci.hpp"
#include "rcto/errors.hpp"
#include "rcto/io.hpp"
#include "rcto/optimizer.hpp"

namespace {

int fail(const std::string& kind, const std::string& message)
{
    std::string line = message;
    for (char& c : line)
        if (c == '\n') c = ' ';
    std::cerr << "error: " << kind << ": " << line << "\n";
    return 1;
}

int cmd_optimize(const std::string& config, const std::string& out, bool quiet)
{
    const rcto::Problem problem = rcto::load_problem(config);
    rcto::Optimizer opt(problem);
    const rcto::RunResult result = opt.run([&](const rcto::IterationRecord& r) {
        if (quiet) return;
        std::printf("it %4d  c %.6e  vc %.4f  vt %.4f  change %.4f  inner %2d  ratio %.3f  beta %g\n",
                    r.iteration, r.compliance, r.concrete_fraction, r.steel_fraction, r.max_change,
                    r.inner_iterations, r.ratio, r.beta);
        std::fflush(stdout);
    });
    rcto::write_bundle(out, rcto::make_bundle(problem, result));
    if (result.thickness) {
        const auto& sub = result.thickness->sub_minimum;
        std::printf("%td of %zu elements below the reporting threshold\n", std::count(sub.begin(), sub.end(), 1),
                    sub.size());
    }
    std::printf("%s after %zu iterations, compliance %.9g, bundle written to %s\n",
                result.converged ? "converged" : "stopped at iteration cap", result.history.size(),
                result.history.empty() ? 0.0 : result.history.back().compliance, out.c_str());
    return 0;
}

int cmd_check_gradients(const std::string& config, bool sweep)
{
    const rcto::Problem problem = rcto::load_problem(config);
    const rcto::GradientReport report = rcto::check_gradients(problem);
    bool ok = true;
    for (const auto& f : report.families) {
        std::printf("%s max_rel_error %.3e (step %.0e, %d variables)\n", f.name.c_str(), f.max_rel_error,
                    f.best_step, f.count);
        if (sweep)
            for (const auto& [h, err] : f.sweep) std::printf("  step %.0e  %.3e\n", h, err);
        ok = ok && f.max_rel_error < 1e-4;
    }
    return ok ? 0 : 1;
}

int cmd_aci(const std::string& path)
{
    const rcto::SectionSpec s = rcto::load_section(path);
    const double Mn = rcto::nominal_moment(s);
    const double P = rcto::three_point_design_load(s);
    if (!s.name.empty()) std::printf("section %s\n", s.name.c_str());
    std::printf("a = %.2f mm\n", rcto::stress_block_depth(s));
    std::printf("M_n = %.3f kN m\n", Mn * 1e-6);
    std::printf("P = %.2f kN\n", P * 1e-3);
    return 0;
}

int cmd_validate(const std::string& path)
{
    const rcto::Problem p = rcto::load_problem(path);
    std::printf("ok: %s mode, %dx%d mesh, %zu truss nodes, %zu members\n", std::string(rcto::to_string(p.config.mode)).c_str(),
                p.mesh.nx, p.mesh.ny, p.ground.nodes.size(), p.ground.members.size());
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Reinforced-concrete topology optimization"};
    app.require_subcommand(1);

    std::string config, out = "rcto-out", section, bundle, format, export_out;
    bool quiet = false, sweep = false;

    auto* optimize = app.add_subcommand("optimize", "run an optimization and write an export bundle");
    optimize->add_option("config", config, "configuration file")->required();
    optimize->add_option("--out", out, "bundle directory");
    optimize->add_flag("--quiet", quiet, "suppress per-iteration output");

    auto* grads = app.add_subcommand("check-gradients", "compare analytic and finite-difference sensitivities");
    grads->add_option("config", config, "configuration file")->required();
    grads->add_flag("--sweep", sweep, "print the error for every step size");

    auto* aci = app.add_subcommand("aci", "nominal capacity of a prismatic section");
    aci->add_option("section", section, "section file")->required();

    auto* exp = app.add_subcommand("export", "re-emit the geometry of a bundle");
    exp->add_option("bundle", bundle, "bundle directory")->required();
    exp->add_option("--format", format, "csv or vtk")->required()->check(CLI::IsMember({"csv", "vtk"}));
    exp->add_option("--out", export_out, "output directory (defaults to the bundle)");

    auto* validate = app.add_subcommand("validate", "parse a configuration and check feasibility");
    validate->add_option("config", config, "configuration file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*optimize) return cmd_optimize(config, out, quiet);
        if (*grads) return cmd_check_gradients(config, sweep);
        if (*aci) return cmd_aci(section);
        if (*exp) {
            rcto::export_bundle(bundle, format, export_out.empty() ? bundle : export_out);
            return 0;
        }
        if (*validate) return cmd_validate(config);
    } catch (const rcto::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    return 2;
}
