#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ivpseudo/pipeline.hpp"
#include "ivpseudo/simgen.hpp"

namespace ivpseudo {

enum class Stage { S2 = 0, S3 = 1, S4 = 2 };
const char* to_string(Stage s);

/// counts[stage][class] with ColumnClass as the class index.
using StageCounts = std::array<std::array<int, 4>, 3>;

struct ReplicateRecord {
    int replicate = 0;
    Method method = Method::proposed;
    /// "ok", "no_estimate" or "error".
    std::string status;
    std::optional<CausalEstimate> estimate;
    bool covers = false;
    StageCounts counts{};
    std::optional<Interval> pseudo_range;
    std::string message;
};

struct HistogramRow {
    int replicate = 0;
    Method method = Method::proposed;
    Index column_id = 0;  // 1-based; pseudo copy of column k reported as p + k
    ColumnClass cls = ColumnClass::irrelevant;
    Stage stage = Stage::S2;
    double ratio = 0.0;
};

struct MetricsRow {
    Method method = Method::proposed;
    double sigma_D2 = 0.0;
    int replicates = 0;
    int estimates = 0;
    int failures = 0;
    double bias = 0.0;
    std::optional<double> se_of_bias;
    double rmse = 0.0;
    double coverage = 0.0;
    double mean_beta = 0.0;
    /// mean_counts[stage][0..2] = invalid, valid, irrelevant (pseudo counted as irrelevant).
    std::array<std::array<double, 3>, 3> mean_counts{};
};

struct McConfig {
    ScenarioConfig scenario;
    int replicates = 1;
    std::vector<Method> methods{Method::proposed};
    int threads = 1;
    std::uint64_t master_seed = 0;
    Tuning tuning;
    bool scale = false;
};

struct McResult {
    std::vector<MetricsRow> metrics;
    std::vector<ReplicateRecord> records;
    std::vector<HistogramRow> histogram;
};

using ProgressFn = std::function<void(int done, int total)>;

McResult monte_carlo(const McConfig& cfg, const ProgressFn& progress = {});

/// Records, histogram rows and counts for one pipeline result.
ReplicateRecord summarize(const PipelineResult& result, const ScenarioConfig& scenario, int replicate,
                          std::vector<HistogramRow>* histogram = nullptr);

std::vector<MetricsRow> aggregate(const std::vector<ReplicateRecord>& records, const std::vector<Method>& methods,
                                  const ScenarioConfig& scenario);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string replicates_csv(const std::vector<ReplicateRecord>& records);
std::string histogram_csv(const std::vector<HistogramRow>& rows);

/// Writes metrics.csv, replicates.csv and histogram.csv into dir (created if needed).
void write_mc_outputs(const McResult& result, const std::string& dir);
void export_histograms(const std::vector<HistogramRow>& rows, const std::string& path);

}  // namespace ivpseudo
