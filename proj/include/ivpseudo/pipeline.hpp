#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ivpseudo/dataset.hpp"
#include "ivpseudo/diagnostics.hpp"
#include "ivpseudo/estimation.hpp"
#include "ivpseudo/lasso.hpp"
#include "ivpseudo/rng.hpp"
#include "ivpseudo/selection.hpp"

namespace ivpseudo {

enum class Method { proposed, naive, split, oracle, ols };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

struct Tuning {
    double omega = 2.01;
    /// 0 selects the default screening size.
    Index screen_s = 0;
    /// Unset means sqrt(log p / n) with p the number of real candidates.
    std::optional<double> lambda_gamma;
    std::optional<double> lambda_Gamma;
    /// Unset means a shared penalty chosen by pooled cross-validation.
    std::optional<double> nodewise_lambda;
    int cv_folds = 10;
    int cv_grid = 20;
    LassoOptions lasso;
    double alpha = 0.05;
    double n1_frac = 0.6;
    bool include_pseudos = false;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    Method method = Method::proposed;
    SelectionTrace trace;
    std::optional<CausalEstimate> estimate;
    Diagnostics diagnostics;
    std::vector<StageTiming> timing;
    /// Number of real candidate columns; trace.S1 entries >= p_real are pseudo.
    Index p_real = 0;
    /// Split only: positions (within S1) passing the second-half threshold.
    IndexList S3_tilde;
    /// Split only: sizes of the two halves.
    Index n1 = 0;
    Index n2 = 0;

    /// Expanded column id for an S1 position.
    Index column_of(Index position) const { return trace.S1[static_cast<std::size_t>(position)]; }
    bool is_pseudo(Index position) const { return column_of(position) >= p_real; }
};

/// round(floor(n / log n)) to the nearest 100, at least 1, capped at `available`.
Index default_screen_size(Index n, Index available);
/// Rounds a positive count to the nearest multiple of 100 (values below 50 stay as is).
Index round_to_hundred(Index value);

/// Centers, partials out covariates and optionally scales Z columns.
Dataset prepare(const Dataset& ds, bool scale = false);

PipelineResult run_proposed(const Dataset& ds, const Tuning& tuning, const RngStream& rng);
PipelineResult run_naive(const Dataset& ds, const Tuning& tuning, const RngStream& rng);
PipelineResult run_split(const Dataset& ds, const Tuning& tuning, const RngStream& rng);
/// 2SLS on the given (0-based) instrument columns.
PipelineResult run_oracle(const Dataset& ds, const IndexList& valid_columns, const Tuning& tuning);
PipelineResult run_ols(const Dataset& ds, const Tuning& tuning);

PipelineResult run_method(Method m, const Dataset& ds, const Tuning& tuning, const RngStream& rng,
                          const IndexList& oracle_columns = {});

}  // namespace ivpseudo
