#include <string>

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rcto/aci.hpp"
#include "rcto/errors.hpp"
#include "rcto/io.hpp"
#include "rcto/optimizer.hpp"

namespace py = pybind11;
using namespace rcto;

namespace {

py::array_t<double> to_array(const std::vector<double>& v)
{
    py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

py::array_t<double> to_array(const std::vector<Vec2>& v)
{
    py::array_t<double> a({static_cast<py::ssize_t>(v.size()), py::ssize_t{2}});
    auto r = a.mutable_unchecked<2>();
    for (std::size_t k = 0; k < v.size(); ++k) {
        r(k, 0) = v[k].x();
        r(k, 1) = v[k].y();
    }
    return a;
}

py::list members_list(const std::vector<TrussMemberSpec>& members)
{
    py::list out;
    for (const auto& m : members) out.append(py::make_tuple(m.node_a, m.node_b, m.area));
    return out;
}

py::dict record_dict(const IterationRecord& r)
{
    py::dict d;
    d["iteration"] = r.iteration;
    d["compliance"] = r.compliance;
    d["concrete_fraction"] = r.concrete_fraction;
    d["steel_fraction"] = r.steel_fraction;
    d["max_change"] = r.max_change;
    d["inner_iterations"] = r.inner_iterations;
    d["ratio"] = r.ratio;
    d["beta"] = r.beta;
    d["split_count"] = r.split_count;
    d["kkt"] = r.kkt;
    return d;
}

py::list history_list(const std::vector<IterationRecord>& h)
{
    py::list out;
    for (const auto& r : h) out.append(record_dict(r));
    return out;
}

py::dict optimize(const Problem& problem, const std::string& out_dir,
                  const std::function<void(py::dict)>& progress)
{
    RunResult r;
    {
        Optimizer opt(problem);
        std::function<void(const IterationRecord&)> cb;
        if (progress) cb = [&](const IterationRecord& rec) { progress(record_dict(rec)); };
        r = opt.run(cb);
    }
    if (!out_dir.empty()) write_bundle(out_dir, make_bundle(problem, r));
    py::dict d;
    d["converged"] = r.converged;
    d["density"] = to_array(r.density);
    d["positions"] = to_array(r.positions);
    d["sizing"] = to_array(r.design.x_t);
    d["members"] = members_list(r.problem.ground.members);
    d["history"] = history_list(r.history);
    d["non_discreteness"] = non_discreteness(r.density);
    if (r.thickness) {
        d["thickness"] = to_array(r.thickness->thickness);
        std::vector<double> sub(r.thickness->sub_minimum.begin(), r.thickness->sub_minimum.end());
        d["sub_minimum"] = to_array(sub);
    }
    return d;
}

} // namespace

PYBIND11_MODULE(_rcto, m)
{
    m.doc() = "Reinforced-concrete topology optimization";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (e.kind() + ": " + e.what()).c_str());
        }
    });

    py::class_<Problem>(m, "Problem")
        .def_property_readonly("mode", [](const Problem& p) { return std::string(to_string(p.config.mode)); })
        .def_property_readonly("nx", [](const Problem& p) { return p.mesh.nx; })
        .def_property_readonly("ny", [](const Problem& p) { return p.mesh.ny; })
        .def_property_readonly("element_size", [](const Problem& p) { return p.mesh.element_size; })
        .def_property_readonly("member_count", [](const Problem& p) { return p.ground.members.size(); })
        .def_property_readonly("node_count", [](const Problem& p) { return p.ground.nodes.size(); })
        .def_property_readonly("concrete_max", [](const Problem& p) { return p.config.concrete_max; })
        .def_property_readonly("steel_max", [](const Problem& p) { return p.config.steel_max; })
        .def("normalize", [](const Problem& p, int indent) { return normalize(p, indent); }, py::arg("indent") = 2)
        .def("__repr__", [](const Problem& p) {
            return "<Problem " + std::string(to_string(p.config.mode)) + " " + std::to_string(p.mesh.nx) + "x" +
                   std::to_string(p.mesh.ny) + ", " + std::to_string(p.ground.members.size()) + " members>";
        });

    m.def("load_problem", &load_problem, py::arg("path"), "Read and validate a configuration file.");
    m.def("build_problem", [](const std::string& text) { return build_problem(text); }, py::arg("text"),
          "Parse and validate a configuration document.");
    m.def("validate", &validate, py::arg("problem"));

    m.def("optimize", &optimize, py::arg("problem"), py::arg("out_dir") = std::string(),
          py::arg("progress") = std::function<void(py::dict)>(),
          "Run the optimizer; writes a bundle when out_dir is given.");

    m.def(
        "check_gradients",
        [](const Problem& p) {
            py::list out;
            for (const auto& f : check_gradients(p).families) {
                py::dict d;
                d["name"] = f.name;
                d["count"] = f.count;
                d["max_rel_error"] = f.max_rel_error;
                d["best_step"] = f.best_step;
                d["sweep"] = f.sweep;
                out.append(d);
            }
            return out;
        },
        py::arg("problem"));

    m.def(
        "aci",
        [](const std::string& path) {
            const SectionSpec s = load_section(path);
            py::dict d;
            d["name"] = s.name;
            d["stress_block_mm"] = stress_block_depth(s);
            d["moment_kNm"] = nominal_moment(s) / 1e6;
            d["load_kN"] = three_point_design_load(s) / 1e3;
            return d;
        },
        py::arg("section_path"));

    m.def("export_bundle", &export_bundle, py::arg("bundle_dir"), py::arg("format"), py::arg("out_dir"));
    m.def(
        "read_bundle",
        [](const std::string& dir) {
            const ExportBundle b = read_bundle(dir);
            py::dict d;
            d["mode"] = std::string(to_string(b.mode));
            d["nx"] = b.mesh.nx;
            d["ny"] = b.mesh.ny;
            d["density"] = to_array(b.density);
            if (!b.thickness.empty()) d["thickness"] = to_array(b.thickness);
            d["nodes"] = to_array(b.nodes);
            d["members"] = members_list(b.members);
            d["sizing"] = to_array(b.sizing);
            d["history"] = history_list(b.history);
            d["config"] = b.config;
            return d;
        },
        py::arg("bundle_dir"));
}
