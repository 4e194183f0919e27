#include "levybsde/config.hpp"
#include "levybsde/errors.hpp"
#include "levybsde/verify.hpp"

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace levybsde;

namespace {

std::shared_ptr<const LevyMeasure> measure_from(const std::string& name,
                                                const std::map<std::string, double>& params) {
    return std::make_shared<const LevyMeasure>(make_measure(name, params));
}

RegressionBasis basis_from(const std::string& family, int degree, int cells) {
    RegressionBasis basis;
    if (family == "polynomial")
        basis.family = RegressionBasis::Family::Polynomial;
    else if (family == "local")
        basis.family = RegressionBasis::Family::Local;
    else
        throw ConfigError("unknown basis family '" + family + "'");
    basis.degree = degree;
    basis.cells = cells;
    return basis;
}

QEstimator estimator_from(const std::string& name) {
    if (name == "representation") return QEstimator::Representation;
    if (name == "martingale") return QEstimator::Martingale;
    throw ConfigError("unknown estimator '" + name + "'");
}

py::dict report_to_dict(const CheckReport& report) {
    py::dict d;
    d["name"] = report.name;
    d["pass"] = report.pass;
    d["threshold"] = report.threshold;
    d["digest"] = report.digest;
    d["statistics"] = report.statistics;
    py::list tables;
    for (const auto& t : report.artifacts) {
        py::dict jt;
        jt["name"] = t.name;
        jt["columns"] = t.columns;
        jt["rows"] = t.rows;
        tables.append(jt);
    }
    d["artifacts"] = tables;
    return d;
}

} // namespace

PYBIND11_MODULE(_levybsde, m) {
    m.doc() = "Coupled BSDE-with-jumps solver, nonlocal operators and verification checks";
    m.attr("__version__") = kLibraryVersion;

    py::register_exception<Error>(m, "NumericsError");
    py::register_exception<ConfigError>(m, "ConfigurationError");
    py::register_exception<UnknownName>(m, "UnknownNameError");

    py::class_<LevyMeasure, std::shared_ptr<LevyMeasure>>(m, "LevyMeasure")
        .def_property_readonly("dim", &LevyMeasure::dim)
        .def_property_readonly("support_radius", &LevyMeasure::support_radius)
        .def_property_readonly("alpha", &LevyMeasure::alpha)
        .def_property_readonly("is_zero", &LevyMeasure::is_zero);

    m.def(
        "make_measure",
        [](const std::string& name, const std::map<std::string, double>& params) {
            return std::make_shared<LevyMeasure>(make_measure(name, params));
        },
        py::arg("name"), py::arg("params") = std::map<std::string, double>{});

    m.def(
        "validate_measure",
        [](const std::shared_ptr<LevyMeasure>& measure, int levels) {
            auto rep = validate(*measure, levels);
            py::dict d;
            d["pass"] = rep.pass;
            d["value"] = rep.value;
            d["level_values"] = rep.level_values;
            d["mass_beyond_support"] = rep.mass_beyond_support;
            return d;
        },
        py::arg("measure"), py::arg("levels") = 4);

    py::class_<TruncatedMeasure>(m, "TruncatedMeasure")
        .def_property_readonly("k", &TruncatedMeasure::k)
        .def_property_readonly("threshold", &TruncatedMeasure::threshold)
        .def_property_readonly("total_mass", &TruncatedMeasure::total_mass);

    m.def(
        "truncate",
        [](const std::shared_ptr<LevyMeasure>& measure, int k) { return truncate(*measure, k); },
        py::arg("measure"), py::arg("k"));

    m.def(
        "sample_jumps",
        [](const TruncatedMeasure& tm, double t0, double t1, std::uint64_t seed) {
            RngStream rng(seed);
            auto jumps = sample_jumps(tm, t0, t1, rng);
            py::array_t<double> times(static_cast<py::ssize_t>(jumps.count()));
            py::array_t<double> marks({static_cast<py::ssize_t>(jumps.count()),
                                       static_cast<py::ssize_t>(jumps.dim)});
            auto tbuf = times.mutable_unchecked<1>();
            auto mbuf = marks.mutable_unchecked<2>();
            for (std::size_t i = 0; i < jumps.count(); ++i) {
                tbuf(static_cast<py::ssize_t>(i)) = jumps.times[i];
                for (int d = 0; d < jumps.dim; ++d)
                    mbuf(static_cast<py::ssize_t>(i), d) = jumps.mark(i)[static_cast<std::size_t>(d)];
            }
            return py::make_tuple(times, marks);
        },
        py::arg("truncated"), py::arg("t0"), py::arg("t1"), py::arg("seed"));

    m.def(
        "small_ball_mass",
        [](const std::shared_ptr<LevyMeasure>& measure, double threshold) {
            return small_ball_mass(*measure, threshold);
        },
        py::arg("measure"), py::arg("threshold"));

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_property_readonly("name", [](const ModelSpec& s) { return s.name; })
        .def_property_readonly("components", [](const ModelSpec& s) { return s.dims.components_m; })
        .def_property_readonly("horizon", [](const ModelSpec& s) { return s.horizon; });

    m.def(
        "make_model",
        [](const std::string& name, const std::map<std::string, double>& params,
           const std::shared_ptr<LevyMeasure>& measure) {
            return make_model(name, params, measure);
        },
        py::arg("name"), py::arg("params") = std::map<std::string, double>{},
        py::arg("measure") = nullptr);

    m.def("model_names", &model_names);
    m.def("measure_names", &measure_names);
    m.def("describe", &describe_entity, py::arg("name"));

    py::class_<PathBundle>(m, "PathBundle")
        .def_property_readonly("n_paths", [](const PathBundle& b) { return b.n_paths; })
        .def_property_readonly("n_steps", [](const PathBundle& b) { return b.grid.n_steps; })
        .def_property_readonly("truncation_k", [](const PathBundle& b) { return b.truncation_k; })
        .def_property_readonly("seed", [](const PathBundle& b) { return b.seed; })
        .def("states",
             [](const PathBundle& b) {
                 py::array_t<double> out({static_cast<py::ssize_t>(b.n_paths),
                                          static_cast<py::ssize_t>(b.grid.n_nodes()),
                                          static_cast<py::ssize_t>(b.state_dim)});
                 std::copy(b.states.begin(), b.states.end(), out.mutable_data());
                 return out;
             })
        .def("jump_count", [](const PathBundle& b) { return b.jump_times.size(); });

    m.def(
        "simulate",
        [](const ModelSpec& spec, const TruncatedMeasure& tm, double t, std::vector<double> x0,
           int n_steps, int n_paths, std::uint64_t seed) {
            auto grid = TimeGrid::uniform(t, spec.horizon, n_steps);
            return simulate(spec, tm, t, x0, grid, n_paths, seed);
        },
        py::arg("model"), py::arg("truncated"), py::arg("t"), py::arg("x0"), py::arg("n_steps"),
        py::arg("n_paths"), py::arg("seed"));

    py::class_<ValueField>(m, "ValueField")
        .def_property_readonly("components", &ValueField::components)
        .def_property_readonly("t_nodes", [](const ValueField& f) { return f.t_nodes(); })
        .def("eval",
             [](const ValueField& f, int component, double t, std::vector<double> x) {
                 return f.eval(component, t, x);
             },
             py::arg("component"), py::arg("t"), py::arg("x"))
        .def("axis",
             [](const ValueField& f, int d) {
                 const auto& a = f.axes()[static_cast<std::size_t>(d)];
                 return py::make_tuple(a.lo, a.hi, a.n);
             },
             py::arg("dim") = 0);

    py::class_<BsdeSolution>(m, "BsdeSolution")
        .def_property_readonly("components", [](const BsdeSolution& s) { return s.components; })
        .def_property_readonly("regression_tolerance",
                               [](const BsdeSolution& s) { return s.regression_tolerance; })
        .def("y0", [](const BsdeSolution& s, int i) { return s.y_at(i, 0, 0); }, py::arg("component") = 0)
        .def("y",
             [](const BsdeSolution& s, int i, int path, int node) { return s.y_at(i, path, node); })
        .def("q", [](const BsdeSolution& s, int i, int path, int step) { return s.q_at(i, path, step); })
        .def_property_readonly("u_fields", [](const BsdeSolution& s) { return s.u_fields; })
        .def_property_readonly("picard_iterations",
                               [](const BsdeSolution& s) { return s.picard_iterations_used; });

    m.def(
        "solve_lsmc",
        [](const ModelSpec& spec, const PathBundle& bundle, const std::string& estimator,
           const std::string& basis_family, int degree, int cells) {
            return solve_lsmc(spec, bundle, basis_from(basis_family, degree, cells),
                              estimator_from(estimator));
        },
        py::arg("model"), py::arg("bundle"), py::arg("estimator") = "representation",
        py::arg("basis_family") = "polynomial", py::arg("degree") = 2, py::arg("cells") = 16);

    m.def(
        "picard_subinterval",
        [](const ModelSpec& spec, const PathBundle& bundle, const std::string& basis_family,
           int degree, int cells) {
            return picard_subinterval(spec, bundle, basis_from(basis_family, degree, cells));
        },
        py::arg("model"), py::arg("bundle"), py::arg("basis_family") = "polynomial",
        py::arg("degree") = 2, py::arg("cells") = 16);

    m.def(
        "solve_fd",
        [](const ModelSpec& spec, int nx, int nt, double box_half_width) {
            FdProblem problem;
            problem.spec = spec;
            problem.nx = nx;
            problem.nt = nt;
            problem.box_half_width = box_half_width;
            return solve_fd(problem);
        },
        py::arg("model"), py::arg("nx") = 201, py::arg("nt") = 200,
        py::arg("box_half_width") = 4.0);

    m.def(
        "u_class_check",
        [](const ValueField& field, std::vector<double> lo, std::vector<double> hi, int n_pairs) {
            Box box;
            box.lo = std::move(lo);
            box.hi = std::move(hi);
            return report_to_dict(u_class_check(field, box, n_pairs));
        },
        py::arg("field"), py::arg("lo"), py::arg("hi"), py::arg("n_pairs") = 2000);

    m.def(
        "run_experiment",
        [](const std::string& config_text, const std::string& out_dir) {
            RunOverrides overrides;
            if (!out_dir.empty()) overrides.out_dir = out_dir;
            auto outcome = run_experiment_text(config_text, overrides);
            py::dict d;
            d["exit_code"] = outcome.exit_code;
            d["all_passed"] = outcome.all_passed;
            d["manifest"] = outcome.manifest_path;
            d["error"] = outcome.error;
            py::list reports;
            for (const auto& r : outcome.reports) reports.append(report_to_dict(r));
            d["reports"] = reports;
            return d;
        },
        py::arg("config_text"), py::arg("out_dir") = "");
}
