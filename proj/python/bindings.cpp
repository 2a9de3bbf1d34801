// Thin Python surface over the C++ core: oracles, control map, checkpoints, sampling, metrics, CLI.
#include "flowam/checkpoint.hpp"
#include "flowam/cli.hpp"
#include "flowam/config.hpp"
#include "flowam/control.hpp"
#include "flowam/errors.hpp"
#include "flowam/eval.hpp"
#include "flowam/oracles.hpp"
#include "flowam/parallel.hpp"
#include "flowam/schedules.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace flowam;

namespace {

// rows of an (n, dim) array <-> vector of states
std::vector<Vec> rows(const Mat& m) {
    std::vector<Vec> out;
    out.reserve(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
    return out;
}

Mat stack(const std::vector<Vec>& xs) {
    Mat m(static_cast<Eigen::Index>(xs.size()), xs.empty() ? 0 : xs.front().size());
    for (std::size_t i = 0; i < xs.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    return m;
}

Mat sample(const VelocityField& f, int n, std::uint64_t seed, int n_steps, const std::string& noise) {
    SamplerSpec spec;
    spec.n_steps = n_steps;
    spec.noise = noise_from_key(noise);
    spec.stochastic = spec.noise.kind != NoiseKind::Zero;
    spec.n_cond = f.architecture().n_cond;
    return stack(terminal_states(sample_batch(f, spec, n, seed)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "flowam core bindings";

    auto base = py::register_exception<Error>(m, "FlowamError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<NonFiniteError>(m, "NonFiniteError", base.ptr());
    py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<TooFewSamples>(m, "TooFewSamples", base.ptr());
    py::register_exception<EmptyInput>(m, "EmptyInput", base.ptr());

    m.attr("__version__") = kToolVersion;

    // schedules
    m.def("drift_coefficients", [](double t) {
        const auto d = drift_coefficients(InterpolantSchedule::linear(), t);
        return py::make_tuple(d.kappa, d.eta);
    }, py::arg("t"), "(kappa_t, eta_t) of the linear interpolant");
    m.def("sigma", [](const std::string& noise, double t) {
        return sigma(noise_from_key(noise), t, InterpolantSchedule::linear());
    }, py::arg("noise"), py::arg("t"));

    // oracles
    m.def("rf_velocity", [](double mu, double s, double x, double t) { return rf_velocity({mu, s}, x, t); },
          py::arg("mu"), py::arg("sigma"), py::arg("x"), py::arg("t"));
    m.def("rf_adjoint", [](double mu, double s, double a1, double t) { return rf_adjoint({mu, s}, a1, t); },
          py::arg("mu"), py::arg("sigma"), py::arg("a1"), py::arg("t"));
    m.def("rf_peak_time", [](double s) { return rf_peak_time({0.0, s}); }, py::arg("sigma"));
    m.def("rf_relative_strength", [](double s, double p, double t) { return rf_relative_strength({0.0, s}, p, t); },
          py::arg("sigma"), py::arg("p"), py::arg("t"));
    auto toy_kind = [](const std::string& k) {
        if (k == "ve") return ToyKind::VE;
        if (k == "vp") return ToyKind::VP;
        throw ConfigError("toy kind must be 've' or 'vp'");
    };
    m.def("toy_control_component", [toy_kind](const std::string& kind, double T, double eta, double t) {
        return toy_control_component({toy_kind(kind), T, eta}, t);
    }, py::arg("kind"), py::arg("T"), py::arg("eta"), py::arg("t"));
    m.def("toy_argmax", [toy_kind](const std::string& kind, double T, double eta) {
        return toy_argmax({toy_kind(kind), T, eta});
    }, py::arg("kind"), py::arg("T"), py::arg("eta"));
    m.def("bimodal_score", &bimodal_score, py::arg("mu"), py::arg("t"), py::arg("x"));
    m.def("tilted_gaussian", [](double c, double mean) {
        const auto g = tilted_gaussian(c, mean);
        return py::make_tuple(g.mean, g.variance);
    }, py::arg("c"), py::arg("m"));

    // control map
    auto reg_of = [](double p, double lambda) {
        RegularizerSpec r;
        r.p = p;
        r.lambda = lambda;
        r.validate();
        return r;
    };
    m.def("control_from_adjoint", [reg_of](const Vec& a, double p, double lambda) {
        return control_from_adjoint(reg_of(p, lambda), a);
    }, py::arg("a"), py::arg("p") = 2.0, py::arg("lam") = 1.0);
    m.def("check_pmp_optimality", [reg_of](const Vec& a, const Vec& u, double p, double lambda) {
        return check_pmp_optimality(reg_of(p, lambda), a, u);
    }, py::arg("a"), py::arg("u"), py::arg("p") = 2.0, py::arg("lam") = 1.0);

    // models
    py::class_<VelocityField>(m, "VelocityField")
        .def_property_readonly("state_dim", &VelocityField::state_dim)
        .def_property_readonly("num_params", &VelocityField::num_params)
        .def("parameters", &VelocityField::parameters)
        .def("velocity", [](const VelocityField& f, const Vec& x, double t, int cond) { return f.velocity(x, t, cond); },
             py::arg("x"), py::arg("t"), py::arg("cond") = kNoCond)
        .def("sample", &sample, py::arg("n"), py::arg("seed") = 0, py::arg("n_steps") = 50,
             py::arg("noise") = "zero", "terminal states as an (n, dim) array; noise 'zero' is the ODE sampler");
    m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path).model; }, py::arg("path"));

    // metrics on (n, dim) arrays
    m.def("diversity_mpd", [](const Mat& xs) { return diversity_mpd(rows(xs)); }, py::arg("samples"));
    m.def("wasserstein1_1d", [](std::vector<double> a, std::vector<double> b) { return wasserstein1_1d(a, b); },
          py::arg("a"), py::arg("b"));
    m.def("energy_distance", [](const Mat& a, const Mat& b) { return energy_distance(rows(a), rows(b)); },
          py::arg("a"), py::arg("b"));
    m.def("knn_coverage_recall", [](const Mat& gen, const Mat& ref, int k) {
        const auto r = knn_coverage_recall(rows(gen), rows(ref), k);
        return py::make_tuple(r.coverage, r.recall);
    }, py::arg("gen"), py::arg("ref"), py::arg("k") = 5);

    // config and CLI
    m.def("resolve_config", [](const std::string& text) { return resolved_config_text(parse_config_text(text)); },
          py::arg("text"), "parse and validate config text, return the resolved form");
    m.def("set_threads", &set_worker_count, py::arg("n"));
    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "flowctl");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "runs a flowctl subcommand in-process; returns (exit_code, stdout, stderr)");
}
