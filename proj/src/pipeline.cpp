#include "ivpseudo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "ivpseudo/errors.hpp"

namespace ivpseudo {

const char* to_string(Method m) {
    switch (m) {
        case Method::proposed: return "proposed";
        case Method::naive: return "naive";
        case Method::split: return "split";
        case Method::oracle: return "oracle";
        case Method::ols: return "ols";
    }
    return "unknown";
}

Method method_from_string(const std::string& s) {
    if (s == "proposed" || s == "full") return Method::proposed;
    if (s == "naive") return Method::naive;
    if (s == "split") return Method::split;
    if (s == "oracle") return Method::oracle;
    if (s == "ols") return Method::ols;
    throw ConfigError("unknown method '" + s + "' (expected proposed, naive, split, oracle, ols)");
}

Index round_to_hundred(Index value) {
    if (value < 50) return std::max<Index>(value, 1);
    return (value + 50) / 100 * 100;
}

Index default_screen_size(Index n, Index available) {
    if (n < 2) throw ConfigError("screening needs n >= 2");
    const auto raw = static_cast<Index>(std::floor(static_cast<double>(n) / std::log(static_cast<double>(n))));
    return std::max<Index>(1, std::min(round_to_hundred(raw), available));
}

Dataset prepare(const Dataset& ds, bool scale) {
    Dataset out = center(ds);
    if (out.X) out = partial_out_covariates(out);
    if (scale) out = scale_columns(out);
    out.centered = true;
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

class StageTimer {
public:
    explicit StageTimer(std::vector<StageTiming>& sink) : sink_(sink), start_(Clock::now()) {}
    void lap(const std::string& stage) {
        const auto now = Clock::now();
        sink_.push_back({stage, std::chrono::duration<double>(now - start_).count()});
        start_ = now;
    }

private:
    std::vector<StageTiming>& sink_;
    Clock::time_point start_;
};

void require_prepared(const Dataset& ds) {
    if (!ds.centered) throw PreconditionError("dataset must be centered before running a pipeline");
    if (ds.X && ds.X->cols() > 0) throw PreconditionError("covariates must be partialled out before running a pipeline");
    ds.validate();
}

// Columns of [Z, P Z] without materializing the pseudo block.
class ExpandedDesign {
public:
    ExpandedDesign(const Matrix& Z, std::vector<std::size_t> perm) : Z_(Z), perm_(std::move(perm)) {}
    ExpandedDesign(const Matrix& Z) : Z_(Z) {}

    Index real() const { return Z_.cols(); }
    Index total() const { return perm_.empty() ? Z_.cols() : 2 * Z_.cols(); }

    Vector column(Index col) const {
        if (col < Z_.cols()) return Z_.col(col);
        const Index k = col - Z_.cols();
        Vector out(Z_.rows());
        for (Index i = 0; i < Z_.rows(); ++i) out(i) = Z_(static_cast<Index>(perm_[static_cast<std::size_t>(i)]), k);
        return out;
    }

    Matrix columns(const IndexList& cols) const {
        Matrix out(Z_.rows(), static_cast<Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = column(cols[c]);
        return out;
    }

    // Same ordering rule as marginal_screen applied to the expanded matrix.
    IndexList screen(const Vector& D, Index s) const {
        const Index m = total();
        if (s > m) throw DimensionError("screening size " + std::to_string(s) + " exceeds " + std::to_string(m) + " columns");
        if (s < 1) throw DimensionError("screening size must be >= 1");
        Vector rho(m);
        rho.head(real()) = marginal_statistics(Z_, D);
        if (!perm_.empty()) {
            Vector Dp(D.size());
            for (Index i = 0; i < D.size(); ++i) Dp(static_cast<Index>(perm_[static_cast<std::size_t>(i)])) = D(i);
            rho.tail(real()) = marginal_statistics(Z_, Dp);
        }
        IndexList idx(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), Index{0});
        auto better = [&](Index a, Index b) { return rho(a) > rho(b) || (rho(a) == rho(b) && a < b); };
        std::partial_sort(idx.begin(), idx.begin() + s, idx.end(), better);
        idx.resize(static_cast<std::size_t>(s));
        return idx;
    }

private:
    const Matrix& Z_;
    std::vector<std::size_t> perm_;
};

struct DebiasedStage {
    DebiasedFit gamma;
    DebiasedFit Gamma;
    NodewisePrecision precision;
    Thetas thetas;
};

DebiasedStage debiased_stage(const Matrix& X, const Vector& D, const Vector& Y, double lambda_gamma,
                             double lambda_Gamma, const Tuning& tuning, const RngStream& rng, Diagnostics& diag) {
    const double n = static_cast<double>(X.rows());
    const Matrix G = X.transpose() * X / n;
    const LassoFit fg = fit_lasso_gram(G, X.transpose() * D / n, D.squaredNorm() / n, lambda_gamma, tuning.lasso);
    const LassoFit fG = fit_lasso_gram(G, X.transpose() * Y / n, Y.squaredNorm() / n, lambda_Gamma, tuning.lasso);
    if (!fg.converged) diag.warn("lasso", "exposure lasso did not converge");
    if (!fG.converged) diag.warn("lasso", "outcome lasso did not converge");

    NodewisePolicy policy;
    if (tuning.nodewise_lambda) {
        policy = FixedLambda{*tuning.nodewise_lambda};
    } else {
        CrossValidatedLambda cv;
        cv.folds = std::min<int>(tuning.cv_folds, static_cast<int>(X.rows()));
        cv.grid_size = tuning.cv_grid;
        cv.seed = rng.derive(stream_purpose::kCrossValidation).next_u64();
        policy = cv;
    }
    DebiasedStage out;
    out.precision = fit_nodewise(X, policy, tuning.lasso, &diag);
    out.gamma = debias(fg, out.precision.M, X, D, &diag);
    out.Gamma = debias(fG, out.precision.M, X, Y, &diag);
    out.thetas = theta_hats(X, D, Y, fg.coefficients, fG.coefficients);
    return out;
}

double default_lambda(Index count, Index n) {
    return std::sqrt(std::log(static_cast<double>(std::max<Index>(count, 1))) / static_cast<double>(n));
}

IndexList map_positions(const IndexList& inner, const IndexList& outer) {
    IndexList out;
    out.reserve(inner.size());
    for (Index k : inner) out.push_back(outer[static_cast<std::size_t>(k)]);
    return out;
}

Index checked_screen_size(const Tuning& tuning, Index n, Index available) {
    const Index s = tuning.screen_s > 0 ? tuning.screen_s : default_screen_size(n, available);
    if (s > available)
        throw DimensionError("screening size " + std::to_string(s) + " exceeds " + std::to_string(available) +
                             " available columns");
    if (s < 2) throw DimensionError("screening size must be >= 2 for the nodewise lasso");
    return s;
}

}  // namespace

PipelineResult run_proposed(const Dataset& ds, const Tuning& tuning, const RngStream& rng) {
    require_prepared(ds);
    PipelineResult res;
    res.method = Method::proposed;
    StageTimer timer(res.timing);
    const Index n = ds.n();
    const Index p = ds.p();
    res.p_real = p;

    RngStream prng = rng.derive(stream_purpose::kPseudo);
    const ExpandedDesign design(ds.Z, prng.permutation(static_cast<std::size_t>(n)));
    const Index s = checked_screen_size(tuning, n, design.total());
    auto& tr = res.trace;
    tr.S1 = design.screen(ds.D, s);
    for (Index pos = 0; pos < s; ++pos)
        if (tr.S1[static_cast<std::size_t>(pos)] >= p) tr.pseudo_positions.push_back(pos);
    timer.lap("screen");

    const Matrix X = design.columns(tr.S1);
    const DebiasedStage st =
        debiased_stage(X, ds.D, ds.Y, tuning.lambda_gamma.value_or(default_lambda(p, n)),
                       tuning.lambda_Gamma.value_or(default_lambda(p, n)), tuning, rng, res.diagnostics);
    timer.lap("debias");

    const ThresholdPolicy policy{tuning.omega, n, s};
    tr.S2 = joint_threshold(st.gamma, policy);
    if (tr.S2.empty()) {
        res.diagnostics.warn("threshold", "no relevant candidates");
        return res;
    }
    tr.ratios = ratio_estimates(st.gamma, st.Gamma, tr.S2);
    const std::set<Index> pseudo(tr.pseudo_positions.begin(), tr.pseudo_positions.end());
    SpuriousRemoval rem = remove_spurious(tr.S2, tr.ratios, pseudo);
    tr.S3 = std::move(rem.S3);
    tr.pseudo_range = rem.pseudo_range;
    if (tr.S3.empty()) {
        res.diagnostics.warn("spurious", "no valid instruments found");
        return res;
    }
    timer.lap("select");

    Diagnostics* diag = &res.diagnostics;
    const PairwiseSe se_fn = [&](Index j, Index l) {
        return se_ratio_difference(j, l, st.gamma, st.Gamma, st.precision, st.thetas, n, diag);
    };
    ModeResult mode = mode_find(tr.S3, tr.ratios, se_fn, policy);
    tr.S4 = std::move(mode.S4);
    tr.vote_counts = std::move(mode.vote_counts);
    timer.lap("mode");

    const IndexList cols = map_positions(tr.S4, tr.S1);
    CausalEstimate est = tsls(design.columns(cols), ds.D, ds.Y, tuning.alpha, &res.diagnostics);
    est.instruments_used = cols;
    res.estimate = est;
    timer.lap("estimate");
    return res;
}

PipelineResult run_naive(const Dataset& ds, const Tuning& tuning, const RngStream& rng) {
    require_prepared(ds);
    PipelineResult res;
    res.method = Method::naive;
    StageTimer timer(res.timing);
    const Index n = ds.n();
    const Index p = ds.p();
    res.p_real = p;

    std::optional<ExpandedDesign> with_pseudo;
    if (tuning.include_pseudos) {
        RngStream prng = rng.derive(stream_purpose::kPseudo);
        with_pseudo.emplace(ds.Z, prng.permutation(static_cast<std::size_t>(n)));
    } else {
        with_pseudo.emplace(ds.Z);
    }
    const ExpandedDesign& design = *with_pseudo;
    const Index s = checked_screen_size(tuning, n, design.total());
    auto& tr = res.trace;
    tr.S1 = design.screen(ds.D, s);
    for (Index pos = 0; pos < s; ++pos)
        if (tr.S1[static_cast<std::size_t>(pos)] >= p) tr.pseudo_positions.push_back(pos);
    timer.lap("screen");

    const Matrix X = design.columns(tr.S1);
    const DebiasedStage st =
        debiased_stage(X, ds.D, ds.Y, tuning.lambda_gamma.value_or(default_lambda(p, n)),
                       tuning.lambda_Gamma.value_or(default_lambda(p, n)), tuning, rng, res.diagnostics);
    timer.lap("debias");

    const ThresholdPolicy policy{tuning.omega, n, s};
    tr.S2 = joint_threshold(st.gamma, policy);
    if (tr.S2.empty()) {
        res.diagnostics.warn("threshold", "no relevant candidates");
        return res;
    }
    tr.ratios = ratio_estimates(st.gamma, st.Gamma, tr.S2);
    tr.S3 = tr.S2;
    NaiveVote vote = vote_naive(tr.S2, st.gamma, st.Gamma, st.precision, st.thetas, policy, &res.diagnostics);
    tr.S4 = std::move(vote.winners);
    tr.vote_counts = std::move(vote.vote_counts);
    timer.lap("vote");

    const IndexList cols = map_positions(tr.S4, tr.S1);
    CausalEstimate est = tsls(design.columns(cols), ds.D, ds.Y, tuning.alpha, &res.diagnostics);
    est.instruments_used = cols;
    res.estimate = est;
    timer.lap("estimate");
    return res;
}

PipelineResult run_split(const Dataset& ds, const Tuning& tuning, const RngStream& rng) {
    require_prepared(ds);
    if (!(tuning.n1_frac > 0.0 && tuning.n1_frac < 1.0)) throw ConfigError("n1 fraction must lie in (0, 1)");
    PipelineResult res;
    res.method = Method::split;
    StageTimer timer(res.timing);
    const Index n = ds.n();
    const Index p = ds.p();
    res.p_real = p;

    RngStream split_rng = rng.derive(stream_purpose::kSampleSplit);
    const auto perm = split_rng.permutation(static_cast<std::size_t>(n));
    const auto n1 = static_cast<Index>(std::llround(tuning.n1_frac * static_cast<double>(n)));
    const Index n2 = n - n1;
    if (n1 < 10 || n2 < 10) throw DimensionError("each half of the split needs at least 10 rows");
    res.n1 = n1;
    res.n2 = n2;
    std::vector<Index> rows1(perm.begin(), perm.begin() + n1);
    std::vector<Index> rows2(perm.begin() + n1, perm.end());
    std::sort(rows1.begin(), rows1.end());
    std::sort(rows2.begin(), rows2.end());
    auto half = [&](const std::vector<Index>& rows) {
        Dataset h;
        h.Z = ds.Z(rows, Eigen::all);
        h.D = ds.D(rows);
        h.Y = ds.Y(rows);
        h.pseudo_mask = ds.pseudo_mask;
        return center(h);
    };
    const Dataset h1 = half(rows1);
    const Dataset h2 = half(rows2);

    // First half: pseudo generation, screening, debiased lasso, spurious removal.
    RngStream prng = rng.derive(stream_purpose::kPseudo);
    const ExpandedDesign design(h1.Z, prng.permutation(static_cast<std::size_t>(n1)));
    const Index s = checked_screen_size(tuning, n1, design.total());
    auto& tr = res.trace;
    tr.S1 = design.screen(h1.D, s);
    for (Index pos = 0; pos < s; ++pos)
        if (tr.S1[static_cast<std::size_t>(pos)] >= p) tr.pseudo_positions.push_back(pos);
    timer.lap("screen");

    const Matrix X = design.columns(tr.S1);
    const DebiasedStage st =
        debiased_stage(X, h1.D, h1.Y, tuning.lambda_gamma.value_or(default_lambda(s, n1)),
                       tuning.lambda_Gamma.value_or(default_lambda(s, n1)), tuning, rng, res.diagnostics);
    timer.lap("debias");

    const ThresholdPolicy policy1{tuning.omega, n1, s};
    tr.S2 = joint_threshold(st.gamma, policy1);
    if (tr.S2.empty()) {
        res.diagnostics.warn("threshold", "no relevant candidates");
        return res;
    }
    tr.ratios = ratio_estimates(st.gamma, st.Gamma, tr.S2);
    const std::set<Index> pseudo(tr.pseudo_positions.begin(), tr.pseudo_positions.end());
    SpuriousRemoval rem = remove_spurious(tr.S2, tr.ratios, pseudo);
    tr.S3 = std::move(rem.S3);
    tr.pseudo_range = rem.pseudo_range;
    if (tr.S3.empty()) {
        res.diagnostics.warn("spurious", "no valid instruments found");
        return res;
    }
    timer.lap("select");

    // Second half: OLS on the surviving real columns.
    const IndexList cols3 = map_positions(tr.S3, tr.S1);
    const auto q = static_cast<Index>(cols3.size());
    if (q >= n2) throw DimensionError("second half has too few rows for " + std::to_string(q) + " candidates");
    const Matrix Zq = h2.Z(Eigen::all, cols3);
    const Matrix ZtZ = Zq.transpose() * Zq;
    Eigen::LLT<Matrix> llt(ZtZ);
    if (llt.info() != Eigen::Success) throw LinearAlgebraError("second-half design is singular");
    const Matrix ZtZinv = llt.solve(Matrix::Identity(q, q));
    const Vector gamma2 = llt.solve(Zq.transpose() * h2.D);
    const Vector Gamma2 = llt.solve(Zq.transpose() * h2.Y);
    const Vector rD = h2.D - Zq * gamma2;
    const Vector rY = h2.Y - Zq * Gamma2;
    const double nd2 = static_cast<double>(n2);
    const Thetas th2{rY.squaredNorm() / nd2, rD.squaredNorm() / nd2, rY.dot(rD) / nd2};
    Vector se2(q);
    for (Index l = 0; l < q; ++l) se2(l) = std::sqrt(std::max(0.0, ZtZinv(l, l) * th2.t22));

    const ThresholdPolicy policy2{tuning.omega, n2, 0};
    const IndexList tilde = joint_threshold(gamma2, se2, policy2);
    res.S3_tilde = map_positions(tilde, tr.S3);
    if (tilde.empty()) {
        res.diagnostics.warn("threshold", "no relevant candidates in the second half");
        return res;
    }
    const auto ratios2 = ratio_estimates(gamma2, Gamma2, tilde);
    const Matrix Minv = nd2 * ZtZinv;
    Diagnostics* diag = &res.diagnostics;
    const PairwiseSe se_fn = [&](Index j, Index l) {
        return se_ratio_difference(j, l, gamma2, Gamma2, Minv, th2, n2, diag);
    };
    ModeResult mode = mode_find(tilde, ratios2, se_fn, policy2);
    tr.S4 = map_positions(mode.S4, tr.S3);
    for (const auto& [k, v] : mode.vote_counts) tr.vote_counts[tr.S3[static_cast<std::size_t>(k)]] = v;
    timer.lap("mode");

    const Matrix Sigma = ZtZ / nd2;
    const Matrix W = split_weight_matrix(Sigma, mode.S4);
    const double beta = split_estimator(gamma2, Gamma2, W, mode.S4);
    const double v = split_variance(beta, gamma2, W, mode.S4, th2, &res.diagnostics);
    CausalEstimate est = split_ci(beta, v, n2, tuning.alpha);
    est.instruments_used = map_positions(tr.S4, tr.S1);
    res.estimate = est;
    timer.lap("estimate");
    return res;
}

PipelineResult run_oracle(const Dataset& ds, const IndexList& valid_columns, const Tuning& tuning) {
    require_prepared(ds);
    if (valid_columns.empty()) throw ConfigError("oracle method needs the true valid instrument set");
    PipelineResult res;
    res.method = Method::oracle;
    res.p_real = ds.p();
    StageTimer timer(res.timing);
    for (Index c : valid_columns)
        if (c < 0 || c >= ds.p()) throw DimensionError("oracle column out of range");
    CausalEstimate est = tsls(ds.Z(Eigen::all, valid_columns), ds.D, ds.Y, tuning.alpha, &res.diagnostics);
    est.instruments_used = valid_columns;
    res.estimate = est;
    timer.lap("estimate");
    return res;
}

PipelineResult run_ols(const Dataset& ds, const Tuning& tuning) {
    require_prepared(ds);
    PipelineResult res;
    res.method = Method::ols;
    res.p_real = ds.p();
    StageTimer timer(res.timing);
    res.estimate = ols(ds.D, ds.Y, tuning.alpha, &res.diagnostics);
    timer.lap("estimate");
    return res;
}

PipelineResult run_method(Method m, const Dataset& ds, const Tuning& tuning, const RngStream& rng,
                          const IndexList& oracle_columns) {
    switch (m) {
        case Method::proposed: return run_proposed(ds, tuning, rng);
        case Method::naive: return run_naive(ds, tuning, rng);
        case Method::split: return run_split(ds, tuning, rng);
        case Method::oracle: return run_oracle(ds, oracle_columns, tuning);
        case Method::ols: return run_ols(ds, tuning);
    }
    throw ConfigError("unknown method");
}

}  // namespace ivpseudo
