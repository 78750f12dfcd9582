#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ivpseudo/errors.hpp"
#include "ivpseudo/estimation.hpp"
#include "ivpseudo/lasso.hpp"
#include "ivpseudo/montecarlo.hpp"
#include "ivpseudo/pipeline.hpp"
#include "ivpseudo/selection.hpp"
#include "ivpseudo/serialize.hpp"
#include "ivpseudo/simgen.hpp"

namespace py = pybind11;
using namespace ivpseudo;

namespace {

Tuning make_tuning(double omega, Index screen_s, std::optional<double> lambda_gamma,
                   std::optional<double> lambda_Gamma, std::optional<double> nodewise_lambda, double alpha,
                   bool include_pseudos) {
    Tuning t;
    t.omega = omega;
    t.screen_s = screen_s;
    t.lambda_gamma = lambda_gamma;
    t.lambda_Gamma = lambda_Gamma;
    t.nodewise_lambda = nodewise_lambda;
    t.alpha = alpha;
    t.include_pseudos = include_pseudos;
    return t;
}

py::dict estimate_dict(const CausalEstimate& e) {
    py::dict d;
    d["beta_hat"] = e.beta_hat;
    d["se"] = e.se;
    d["ci_low"] = e.ci_low;
    d["ci_high"] = e.ci_high;
    d["method"] = to_string(e.method);
    return d;
}

}  // namespace

PYBIND11_MODULE(_ivpseudo, m) {
    m.doc() = "IV estimation with pseudo-variable screening";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<DegeneracyError>(m, "DegeneracyError", base.ptr());
    py::register_exception<LinearAlgebraError>(m, "LinearAlgebraError", base.ptr());
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.def(
        "fit_lasso",
        [](const Matrix& X, const Vector& y, double lam, double tol, int max_iter) {
            const LassoFit f = fit_lasso(X, y, lam, LassoOptions{tol, max_iter});
            py::dict d;
            d["coefficients"] = f.coefficients;
            d["lambda"] = f.lambda;
            d["objective_value"] = f.objective_value;
            d["iterations"] = f.iterations;
            d["converged"] = f.converged;
            return d;
        },
        py::arg("X"), py::arg("y"), py::arg("lam"), py::arg("tol") = 1e-7, py::arg("max_iter") = 10000);
    m.def("lambda_max", &lambda_max, py::arg("X"), py::arg("y"));
    m.def(
        "generate_pseudos",
        [](const Matrix& Z, std::uint64_t seed, std::uint64_t stream) {
            RngStream rng(seed, stream);
            return generate_pseudos(Z, rng);
        },
        py::arg("Z"), py::arg("seed") = 0, py::arg("stream") = 0);
    m.def("normal_critical", &normal_critical, py::arg("alpha"));
    m.def(
        "tsls",
        [](const Matrix& Z, const Vector& D, const Vector& Y, double alpha) {
            return estimate_dict(tsls(Z, D, Y, alpha));
        },
        py::arg("Z"), py::arg("D"), py::arg("Y"), py::arg("alpha") = 0.05);

    m.def("preset_names", &preset_names);
    m.def(
        "preset_json", [](const std::string& name, Index p) { return to_json(preset(name, p)).dump(); },
        py::arg("name"), py::arg("p") = 0);
    m.def(
        "simulate",
        [](const std::string& scenario_json, std::uint64_t seed) {
            const ScenarioConfig cfg = scenario_from_json(nlohmann::json::parse(scenario_json));
            RngStream data_rng = RngStream(seed, 0).derive(stream_purpose::kData);
            const Dataset ds = gen_dataset(cfg, data_rng);
            py::dict d;
            d["Z"] = ds.Z;
            d["D"] = ds.D;
            d["Y"] = ds.Y;
            d["X"] = ds.X ? py::cast(*ds.X) : py::none();
            return d;
        },
        py::arg("scenario_json"), py::arg("seed") = 0);

    m.def(
        "estimate",
        [](const Matrix& Z, const Vector& D, const Vector& Y, std::optional<Matrix> X, const std::string& method,
           std::uint64_t seed, double omega, Index screen_s, std::optional<double> lambda_gamma,
           std::optional<double> lambda_Gamma, std::optional<double> nodewise_lambda, double alpha,
           bool include_pseudos, bool scale) {
            const Dataset ds = prepare(make_dataset(Z, D, Y, std::move(X)), scale);
            const Tuning t =
                make_tuning(omega, screen_s, lambda_gamma, lambda_Gamma, nodewise_lambda, alpha, include_pseudos);
            PipelineResult r;
            {
                py::gil_scoped_release release;
                r = run_method(method_from_string(method), ds, t, RngStream(seed, 0));
            }
            return to_json(r, false).dump();
        },
        py::arg("Z"), py::arg("D"), py::arg("Y"), py::arg("X") = py::none(), py::arg("method") = "proposed",
        py::arg("seed") = 0, py::arg("omega") = 2.01, py::arg("screen_s") = 0, py::arg("lambda_gamma") = py::none(),
        py::arg("lambda_Gamma") = py::none(), py::arg("nodewise_lambda") = py::none(), py::arg("alpha") = 0.05,
        py::arg("include_pseudos") = false, py::arg("scale") = false);

    m.def(
        "monte_carlo",
        [](const std::string& scenario_json, int replicates, const std::vector<std::string>& methods, int threads,
           std::uint64_t seed, double omega, Index screen_s) {
            McConfig cfg;
            cfg.scenario = scenario_from_json(nlohmann::json::parse(scenario_json));
            cfg.replicates = replicates;
            cfg.threads = threads;
            cfg.master_seed = seed;
            cfg.tuning.omega = omega;
            cfg.tuning.screen_s = screen_s;
            cfg.methods.clear();
            for (const auto& name : methods) cfg.methods.push_back(method_from_string(name));
            McResult res;
            {
                py::gil_scoped_release release;
                res = monte_carlo(cfg);
            }
            return py::make_tuple(metrics_csv(res.metrics), replicates_csv(res.records));
        },
        py::arg("scenario_json"), py::arg("replicates") = 1, py::arg("methods") = std::vector<std::string>{"proposed"},
        py::arg("threads") = 1, py::arg("seed") = 0, py::arg("omega") = 2.01, py::arg("screen_s") = 0);

#ifdef VERSION_INFO
#define IVP_STR2(x) #x
#define IVP_STR(x) IVP_STR2(x)
    m.attr("__version__") = IVP_STR(VERSION_INFO);
#else
    m.attr("__version__") = "dev";
#endif
}
