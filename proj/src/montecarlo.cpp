#include "ivpseudo/montecarlo.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "ivpseudo/errors.hpp"

namespace ivpseudo {

const char* to_string(Stage s) {
    switch (s) {
        case Stage::S2: return "S2";
        case Stage::S3: return "S3";
        case Stage::S4: return "S4";
    }
    return "?";
}

namespace {

constexpr std::uint64_t kMethodStreamBase = 100;

std::string sanitize(std::string s) {
    for (auto& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
    return s;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

ReplicateRecord summarize_with(const PipelineResult& result, const std::vector<ColumnClass>& classes, double beta_star,
                               int replicate, std::vector<HistogramRow>* histogram) {
    ReplicateRecord rec;
    rec.replicate = replicate;
    rec.method = result.method;
    rec.estimate = result.estimate;
    rec.status = result.estimate ? "ok" : "no_estimate";
    if (result.estimate) rec.covers = result.estimate->covers(beta_star);
    rec.pseudo_range = result.trace.pseudo_range;
    if (!result.estimate && !result.diagnostics.empty()) rec.message = result.diagnostics.items().back().message;

    const auto& tr = result.trace;
    auto class_of = [&](Index pos) {
        const Index col = tr.S1[static_cast<std::size_t>(pos)];
        return col >= result.p_real ? ColumnClass::pseudo : classes[static_cast<std::size_t>(col)];
    };
    const std::array<const IndexList*, 3> sets = {&tr.S2, &tr.S3, &tr.S4};
    for (std::size_t st = 0; st < 3; ++st) {
        for (Index pos : *sets[st]) {
            const ColumnClass c = class_of(pos);
            ++rec.counts[st][static_cast<std::size_t>(c)];
            if (histogram != nullptr) {
                HistogramRow row;
                row.replicate = replicate;
                row.method = result.method;
                row.column_id = tr.S1[static_cast<std::size_t>(pos)] + 1;
                row.cls = c;
                row.stage = static_cast<Stage>(st);
                auto it = tr.ratios.find(pos);
                row.ratio = it != tr.ratios.end() ? it->second : std::numeric_limits<double>::quiet_NaN();
                histogram->push_back(row);
            }
        }
    }
    return rec;
}

}  // namespace

ReplicateRecord summarize(const PipelineResult& result, const ScenarioConfig& scenario, int replicate,
                          std::vector<HistogramRow>* histogram) {
    return summarize_with(result, classify_columns(scenario), scenario.beta_star, replicate, histogram);
}

std::vector<MetricsRow> aggregate(const std::vector<ReplicateRecord>& records, const std::vector<Method>& methods,
                                  const ScenarioConfig& scenario) {
    std::vector<MetricsRow> out;
    for (Method m : methods) {
        MetricsRow row;
        row.method = m;
        row.sigma_D2 = scenario.sigma_D2;
        std::vector<double> betas;
        int covered = 0;
        int counted = 0;
        for (const auto& r : records) {
            if (r.method != m) continue;
            ++row.replicates;
            if (r.status != "error") {
                ++counted;
                for (std::size_t st = 0; st < 3; ++st) {
                    row.mean_counts[st][0] += r.counts[st][static_cast<std::size_t>(ColumnClass::invalid)];
                    row.mean_counts[st][1] += r.counts[st][static_cast<std::size_t>(ColumnClass::valid)];
                    row.mean_counts[st][2] += r.counts[st][static_cast<std::size_t>(ColumnClass::irrelevant)] +
                                              r.counts[st][static_cast<std::size_t>(ColumnClass::pseudo)];
                }
            }
            if (r.estimate) {
                betas.push_back(r.estimate->beta_hat);
                if (r.covers) ++covered;
            }
        }
        if (counted > 0)
            for (auto& st : row.mean_counts)
                for (auto& v : st) v /= counted;
        row.estimates = static_cast<int>(betas.size());
        row.failures = row.replicates - row.estimates;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (betas.empty()) {
            row.bias = row.rmse = row.coverage = row.mean_beta = nan;
        } else {
            const double k = static_cast<double>(betas.size());
            double sum = 0.0;
            double sq = 0.0;
            for (double b : betas) {
                sum += b;
                sq += (b - scenario.beta_star) * (b - scenario.beta_star);
            }
            row.mean_beta = sum / k;
            row.bias = row.mean_beta - scenario.beta_star;
            row.rmse = std::sqrt(sq / k);
            row.coverage = covered / k;
            if (betas.size() >= 2) {
                double ss = 0.0;
                for (double b : betas) ss += (b - row.mean_beta) * (b - row.mean_beta);
                row.se_of_bias = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
            }
        }
        out.push_back(row);
    }
    return out;
}

McResult monte_carlo(const McConfig& cfg, const ProgressFn& progress) {
    if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (cfg.methods.empty()) throw ConfigError("at least one method is required");
    cfg.scenario.validate();

    IndexList oracle_cols;
    const auto classes = classify_columns(cfg.scenario);
    for (Index j = 0; j < cfg.scenario.p; ++j)
        if (classes[static_cast<std::size_t>(j)] == ColumnClass::valid) oracle_cols.push_back(j);

    const auto R = static_cast<std::size_t>(cfg.replicates);
    std::vector<std::vector<ReplicateRecord>> recs(R);
    std::vector<std::vector<HistogramRow>> hists(R);
    std::atomic<std::size_t> next{0};
    std::atomic<int> done{0};
    std::mutex progress_mutex;

    auto work = [&] {
        while (true) {
            const std::size_t r = next.fetch_add(1);
            if (r >= R) break;
            const RngStream rep(cfg.master_seed, r);
            std::optional<Dataset> ds;
            std::string gen_error;
            try {
                RngStream data_rng = rep.derive(stream_purpose::kData);
                ds = prepare(gen_dataset(cfg.scenario, data_rng), cfg.scale);
            } catch (const std::exception& e) {
                gen_error = e.what();
            }
            for (Method m : cfg.methods) {
                ReplicateRecord rec;
                if (ds) {
                    try {
                        const PipelineResult res =
                            run_method(m, *ds, cfg.tuning, rep.derive(kMethodStreamBase + static_cast<std::uint64_t>(m)),
                                       oracle_cols);
                        rec = summarize_with(res, classes, cfg.scenario.beta_star, static_cast<int>(r), &hists[r]);
                    } catch (const std::exception& e) {
                        rec.status = "error";
                        rec.message = e.what();
                    }
                } else {
                    rec.status = "error";
                    rec.message = gen_error;
                }
                rec.replicate = static_cast<int>(r);
                rec.method = m;
                recs[r].push_back(std::move(rec));
            }
            const int d = ++done;
            if (progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                progress(d, cfg.replicates);
            }
        }
    };

    const int nthreads = std::min<int>(cfg.threads, cfg.replicates);
    if (nthreads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    McResult out;
    for (std::size_t r = 0; r < R; ++r) {
        for (auto& rec : recs[r]) out.records.push_back(std::move(rec));
        for (auto& h : hists[r]) out.histogram.push_back(h);
    }
    out.metrics = aggregate(out.records, cfg.methods, cfg.scenario);
    return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string s =
        "method,sigma_D2,replicates,estimates,failures,mean_beta,bias,se_of_bias,rmse,coverage,"
        "S2_invalid,S2_valid,S2_irrelevant,S3_invalid,S3_valid,S3_irrelevant,S4_invalid,S4_valid,S4_irrelevant\n";
    for (const auto& r : rows) {
        s += to_string(r.method);
        s += "," + format_double(r.sigma_D2) + "," + std::to_string(r.replicates) + "," + std::to_string(r.estimates) +
             "," + std::to_string(r.failures) + "," + format_double(r.mean_beta) + "," + format_double(r.bias) + "," +
             fmt_opt(r.se_of_bias) + "," + format_double(r.rmse) + "," + format_double(r.coverage);
        for (const auto& st : r.mean_counts)
            for (double v : st) s += "," + format_double(v);
        s += "\n";
    }
    return s;
}

std::string replicates_csv(const std::vector<ReplicateRecord>& records) {
    std::string s = "replicate,method,status,beta_hat,se,ci_low,ci_high,covers";
    for (const char* st : {"S2", "S3", "S4"})
        for (const char* c : {"invalid", "valid", "irrelevant", "pseudo"}) s += std::string(",") + st + "_" + c;
    s += ",pseudo_lo,pseudo_hi,message\n";
    for (const auto& r : records) {
        s += std::to_string(r.replicate) + "," + to_string(r.method) + "," + r.status;
        if (r.estimate) {
            s += "," + format_double(r.estimate->beta_hat) + "," + format_double(r.estimate->se) + "," +
                 format_double(r.estimate->ci_low) + "," + format_double(r.estimate->ci_high) + "," +
                 (r.covers ? "1" : "0");
        } else {
            s += ",,,,,";
        }
        for (const auto& st : r.counts)
            for (int v : st) s += "," + std::to_string(v);
        if (r.pseudo_range) {
            s += "," + format_double(r.pseudo_range->lo) + "," + format_double(r.pseudo_range->hi);
        } else {
            s += ",,";
        }
        s += "," + sanitize(r.message) + "\n";
    }
    return s;
}

std::string histogram_csv(const std::vector<HistogramRow>& rows) {
    std::string s = "replicate,method,column_id,class,stage,ratio\n";
    for (const auto& h : rows) {
        s += std::to_string(h.replicate) + "," + to_string(h.method) + "," + std::to_string(h.column_id) + "," +
             to_string(h.cls) + "," + to_string(h.stage) + "," + format_double(h.ratio) + "\n";
    }
    return s;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

void export_histograms(const std::vector<HistogramRow>& rows, const std::string& path) {
    write_text(path, histogram_csv(rows));
}

void write_mc_outputs(const McResult& result, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    const std::filesystem::path base(dir);
    write_text(base / "metrics.csv", metrics_csv(result.metrics));
    write_text(base / "replicates.csv", replicates_csv(result.records));
    write_text(base / "histogram.csv", histogram_csv(result.histogram));
}

}  // namespace ivpseudo
