#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ivpseudo/dataset.hpp"
#include "ivpseudo/errors.hpp"
#include "ivpseudo/montecarlo.hpp"
#include "ivpseudo/pipeline.hpp"
#include "ivpseudo/serialize.hpp"
#include "ivpseudo/simgen.hpp"

using namespace ivpseudo;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoEstimate = 2;
constexpr Index kDeskP = 2000;

struct TuningArgs {
    double omega = 2.01;
    Index screen_s = 0;
    double lambda = -1.0;
    double nodewise_lambda = -1.0;
    double alpha = 0.05;
    double n1_frac = 0.6;
    bool include_pseudos = false;
    int cv_folds = 10;
};

void add_tuning_options(CLI::App* app, TuningArgs& t) {
    app->add_option("--omega", t.omega, "Threshold constant omega")->check(CLI::PositiveNumber);
    app->add_option("--screen-s", t.screen_s, "Screening size s (0 = floor(n/log n) rounded to 100)");
    app->add_option("--lambda", t.lambda, "Lasso penalty for both regressions (default sqrt(log p / n))");
    app->add_option("--nodewise-lambda", t.nodewise_lambda, "Fixed nodewise penalty (default: pooled CV)");
    app->add_option("--cv-folds", t.cv_folds, "Folds for the nodewise cross-validation")->check(CLI::Range(2, 1000));
    app->add_option("--alpha", t.alpha, "Confidence level complement")->check(CLI::Range(1e-12, 1.0 - 1e-12));
    app->add_option("--n1-frac", t.n1_frac, "First-half fraction for the split method")
        ->check(CLI::Range(0.01, 0.99));
    app->add_flag("--include-pseudos", t.include_pseudos, "Naive method: screen the pseudo-augmented matrix");
}

void apply_tuning_json(const json& j, TuningArgs& t) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "omega") t.omega = it->get<double>();
        else if (k == "screen_s") t.screen_s = it->get<Index>();
        else if (k == "lambda") t.lambda = it->get<double>();
        else if (k == "nodewise_lambda") t.nodewise_lambda = it->get<double>();
        else if (k == "alpha") t.alpha = it->get<double>();
        else if (k == "n1_frac") t.n1_frac = it->get<double>();
        else if (k == "include_pseudos") t.include_pseudos = it->get<bool>();
        else if (k == "cv_folds") t.cv_folds = it->get<int>();
        else throw ConfigError("unknown tuning field '" + k + "'");
    }
}

Tuning to_tuning(const TuningArgs& a) {
    Tuning t;
    t.omega = a.omega;
    t.screen_s = a.screen_s;
    if (a.lambda >= 0.0) t.lambda_gamma = t.lambda_Gamma = a.lambda;
    if (a.nodewise_lambda >= 0.0) t.nodewise_lambda = a.nodewise_lambda;
    t.alpha = a.alpha;
    t.n1_frac = a.n1_frac;
    t.include_pseudos = a.include_pseudos;
    t.cv_folds = a.cv_folds;
    return t;
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
}

// Preset (desk-scale p unless overridden) -> config-file merge patch -> key=value overrides.
ScenarioConfig build_scenario(const std::string& preset_name, const std::string& config_path,
                              const std::vector<std::string>& overrides, TuningArgs* tuning) {
    json patch = json::object();
    if (!config_path.empty()) {
        patch = read_json_file(config_path);
        if (!patch.is_object()) throw ConfigError("configuration file must hold a JSON object");
        if (patch.contains("tuning")) {
            if (tuning == nullptr) throw ConfigError("tuning section is not accepted by this command");
            apply_tuning_json(patch["tuning"], *tuning);
            patch.erase("tuning");
        }
    }
    for (const auto& o : overrides) apply_override(patch, o);

    Index p = kDeskP;
    if (patch.contains("p")) p = patch["p"].get<Index>();
    json base = preset_name.empty() ? json::object() : to_json(preset(preset_name, p));
    base.merge_patch(patch);
    return scenario_from_json(base);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_or_print(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << text;
}

std::string summary_line(const PipelineResult& r) {
    std::ostringstream os;
    os << to_string(r.method) << ": ";
    if (r.estimate) {
        const auto& e = *r.estimate;
        os << "beta_hat=" << format_double(e.beta_hat) << " se=" << format_double(e.se) << " ci=["
           << format_double(e.ci_low) << ", " << format_double(e.ci_high) << "] instruments="
           << e.instruments_used.size();
    } else {
        os << "no estimate";
        if (!r.diagnostics.empty()) os << " (" << r.diagnostics.items().back().message << ")";
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instrument selection with permutation pseudo variables"};
    app.require_subcommand(1);

    // estimate
    auto* est = app.add_subcommand("estimate", "Select instruments and estimate the causal effect from a CSV file");
    std::string data_path, exposure, outcome, covariates, method_name = "proposed", est_out;
    std::uint64_t est_seed = 0;
    bool scale = false;
    TuningArgs est_tuning;
    est->add_option("--data", data_path, "CSV file with a header row")->required();
    est->add_option("--exposure", exposure, "Exposure column name")->required();
    est->add_option("--outcome", outcome, "Outcome column name")->required();
    est->add_option("--covariates", covariates, "Comma-separated covariate columns");
    est->add_option("--method", method_name, "proposed | naive | split | ols")
        ->check(CLI::IsMember({"proposed", "naive", "split", "ols"}));
    est->add_option("--seed", est_seed, "Master seed");
    est->add_option("--out", est_out, "Write the JSON result here (default stdout)");
    est->add_flag("--scale", scale, "Scale candidate columns to unit variance after centering");
    add_tuning_options(est, est_tuning);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a dataset from a scenario preset");
    std::string sim_preset, sim_config, sim_out;
    std::vector<std::string> sim_overrides;
    std::uint64_t sim_seed = 0;
    sim->add_option("--preset", sim_preset, "Scenario preset")->required();
    sim->add_option("--override", sim_overrides, "key=value override (value parsed as JSON)");
    sim->add_option("--config", sim_config, "JSON merge patch for the scenario");
    sim->add_option("--seed", sim_seed, "Master seed")->required();
    sim->add_option("--out", sim_out, "Output CSV path")->required();

    // mc
    auto* mc = app.add_subcommand("mc", "Monte Carlo experiment over a scenario preset");
    std::string mc_preset, mc_config, mc_methods = "proposed", mc_out;
    std::vector<std::string> mc_overrides;
    int mc_reps = 1, mc_threads = 1;
    std::uint64_t mc_seed = 0;
    bool mc_quiet = false;
    TuningArgs mc_tuning;
    mc->add_option("--preset", mc_preset, "Scenario preset")->required();
    mc->add_option("--override", mc_overrides, "key=value override (value parsed as JSON)");
    mc->add_option("--config", mc_config, "JSON merge patch; an optional \"tuning\" object sets tuning fields");
    mc->add_option("--replicates", mc_reps, "Number of replicates")->check(CLI::PositiveNumber);
    mc->add_option("--methods", mc_methods, "Comma-separated: proposed,naive,split,oracle,ols");
    mc->add_option("--threads", mc_threads, "Worker threads")->check(CLI::PositiveNumber);
    mc->add_option("--seed", mc_seed, "Master seed");
    mc->add_option("--out-dir", mc_out, "Output directory")->required();
    mc->add_flag("--quiet", mc_quiet, "Suppress progress output");
    add_tuning_options(mc, mc_tuning);

    // show-preset
    auto* show = app.add_subcommand("show-preset", "Print a preset scenario as JSON");
    std::string show_name;
    Index show_p = kDeskP;
    show->add_option("name", show_name, "Preset name")->required();
    show->add_option("--p", show_p, "Candidate count (0 = published value)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }

    try {
        if (*est) {
            const Dataset raw = load_csv(data_path, exposure, outcome, split_list(covariates));
            const Dataset ds = prepare(raw, scale);
            const Tuning tuning = to_tuning(est_tuning);
            const PipelineResult r =
                run_method(method_from_string(method_name), ds, tuning, RngStream(est_seed, 0));
            json j = to_json(r);
            j["n"] = ds.n();
            j["p"] = ds.p();
            json s1 = j["trace"]["S1"];
            json names = json::array();
            for (const auto& c : s1) {
                const Index id = c.get<Index>() - 1;
                names.push_back(id < ds.p() ? raw.z_names[static_cast<std::size_t>(id)]
                                            : "pseudo:" + raw.z_names[static_cast<std::size_t>(id - ds.p())]);
            }
            j["trace"]["S1_names"] = names;
            std::cerr << summary_line(r) << "\n";
            write_or_print(est_out, j.dump(2) + "\n");
            return r.estimate ? kExitOk : kExitNoEstimate;
        }
        if (*sim) {
            const ScenarioConfig cfg = build_scenario(sim_preset, sim_config, sim_overrides, nullptr);
            RngStream rep(sim_seed, 0);
            RngStream data_rng = rep.derive(stream_purpose::kData);
            const Dataset ds = gen_dataset(cfg, data_rng);
            write_csv(ds, sim_out);
            std::cerr << "wrote " << ds.n() << " rows, " << ds.p() << " candidates to " << sim_out << "\n";
            return kExitOk;
        }
        if (*mc) {
            McConfig cfg;
            cfg.scenario = build_scenario(mc_preset, mc_config, mc_overrides, &mc_tuning);
            cfg.replicates = mc_reps;
            cfg.threads = mc_threads;
            cfg.master_seed = mc_seed;
            cfg.tuning = to_tuning(mc_tuning);
            cfg.methods.clear();
            for (const auto& m : split_list(mc_methods)) cfg.methods.push_back(method_from_string(m));
            ProgressFn progress;
            if (!mc_quiet) {
                progress = [](int done, int total) {
                    if (done == total || done % 10 == 0) std::cerr << "\r" << done << "/" << total << std::flush;
                    if (done == total) std::cerr << "\n";
                };
            }
            const McResult res = monte_carlo(cfg, progress);
            write_mc_outputs(res, mc_out);
            std::cout << metrics_csv(res.metrics);
            return kExitOk;
        }
        if (*show) {
            std::cout << to_json(preset(show_name, show_p)).dump(2) << "\n";
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error (" << e.category() << "): " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
