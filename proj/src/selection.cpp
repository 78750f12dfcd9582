#include "ivpseudo/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ivpseudo/errors.hpp"

namespace ivpseudo {

double ThresholdPolicy::log_scale() const {
    const double m = static_cast<double>(std::max(n, s));
    if (!(m > 1.0)) throw ConfigError("threshold needs max(n, s) > 1");
    return std::log(m);
}

double ThresholdPolicy::joint_delta() const {
    if (!(omega > 0.0)) throw ConfigError("omega must be positive");
    return std::sqrt(omega * log_scale());
}

double ThresholdPolicy::mode_threshold() const {
    if (!(omega > 0.0)) throw ConfigError("omega must be positive");
    return std::sqrt(omega * omega * log_scale());
}

Vector marginal_statistics(const Matrix& Z, const Vector& D) {
    if (Z.rows() != D.size()) throw DimensionError("Z and D have different row counts");
    const Vector num = (Z.transpose() * D).cwiseAbs();
    const Vector den = Z.colwise().squaredNorm().transpose();
    Vector rho(Z.cols());
    for (Index j = 0; j < Z.cols(); ++j) {
        if (!(den(j) > 0.0)) throw DegeneracyError("column " + std::to_string(j + 1) + " has zero norm");
        rho(j) = num(j) / den(j);
    }
    return rho;
}

IndexList marginal_screen(const Matrix& Z, const Vector& D, Index s) {
    const Index m = Z.cols();
    if (s > m) throw DimensionError("screening size " + std::to_string(s) + " exceeds " + std::to_string(m) + " columns");
    if (s < 1) throw DimensionError("screening size must be >= 1");
    const Vector rho = marginal_statistics(Z, D);
    IndexList idx(static_cast<std::size_t>(m));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto better = [&](Index a, Index b) { return rho(a) > rho(b) || (rho(a) == rho(b) && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + s, idx.end(), better);
    idx.resize(static_cast<std::size_t>(s));
    return idx;
}

Matrix generate_pseudos(const Matrix& Z, RngStream& rng) {
    const auto perm = rng.permutation(static_cast<std::size_t>(Z.rows()));
    Matrix out(Z.rows(), Z.cols());
    for (Index i = 0; i < Z.rows(); ++i) out.row(i) = Z.row(static_cast<Index>(perm[static_cast<std::size_t>(i)]));
    return out;
}

IndexList joint_threshold(const Vector& estimates, const Vector& ses, const ThresholdPolicy& policy) {
    if (estimates.size() != ses.size()) throw DimensionError("estimates and ses differ in length");
    const double delta = policy.joint_delta();
    IndexList out;
    for (Index l = 0; l < estimates.size(); ++l)
        if (std::abs(estimates(l)) >= delta * ses(l)) out.push_back(l);
    return out;
}

std::map<Index, double> ratio_estimates(const Vector& gamma_hat, const Vector& Gamma_hat, const IndexList& S2) {
    if (gamma_hat.size() != Gamma_hat.size()) throw DimensionError("gamma and Gamma estimates differ in length");
    std::map<Index, double> out;
    for (Index l : S2) {
        if (l < 0 || l >= gamma_hat.size()) throw DimensionError("position out of range");
        if (gamma_hat(l) == 0.0)
            throw DegeneracyError("exposure estimate is zero at position " + std::to_string(l + 1));
        out[l] = Gamma_hat(l) / gamma_hat(l);
    }
    return out;
}

SpuriousRemoval remove_spurious(const IndexList& S2, const std::map<Index, double>& ratios,
                                const std::set<Index>& pseudo_positions) {
    SpuriousRemoval out;
    for (Index l : S2) {
        if (!pseudo_positions.count(l)) continue;
        const double r = ratios.at(l);
        if (!out.pseudo_range) {
            out.pseudo_range = Interval{r, r};
        } else {
            out.pseudo_range->lo = std::min(out.pseudo_range->lo, r);
            out.pseudo_range->hi = std::max(out.pseudo_range->hi, r);
        }
    }
    for (Index l : S2) {
        if (pseudo_positions.count(l)) continue;
        if (out.pseudo_range && out.pseudo_range->contains(ratios.at(l))) continue;
        out.S3.push_back(l);
    }
    return out;
}

double se_ratio_difference(Index j, Index l, const Vector& gamma_hat, const Vector& Gamma_hat, const Matrix& M,
                           const Thetas& th, Index n, Diagnostics* diag) {
    const double gj = gamma_hat(j);
    const double gl = gamma_hat(l);
    if (gj == 0.0 || gl == 0.0) throw DegeneracyError("ratio difference needs nonzero exposure estimates");
    const double bj = Gamma_hat(j) / gj;
    const double bl = Gamma_hat(l) / gl;
    const double vjj = M(j, j) / (gj * gj) * (th.t11 - 2.0 * bj * th.t12 + bj * bj * th.t22);
    const double vll = M(l, l) / (gl * gl) * (th.t11 - 2.0 * bl * th.t12 + bl * bl * th.t22);
    const double mjl = 0.5 * (M(j, l) + M(l, j));
    const double vjl = mjl / (gj * gl) * (th.t11 - (bj + bl) * th.t12 + bj * bl * th.t22);
    const double var = (vjj - 2.0 * vjl + vll) / static_cast<double>(n);
    if (!(var > 0.0) || !std::isfinite(var)) {
        warn_to(diag, "mode", "nonpositive ratio-difference variance floored (positions " + std::to_string(j + 1) +
                                  ", " + std::to_string(l + 1) + ")");
        return 1e-12;
    }
    return std::sqrt(var);
}

ModeResult mode_find(const IndexList& S3, const std::map<Index, double>& ratios, const PairwiseSe& se_fn,
                     const ThresholdPolicy& policy) {
    if (S3.empty()) throw PreconditionError("mode finding needs a nonempty candidate set");
    const double thr = policy.mode_threshold();
    const std::size_t k = S3.size();
    std::vector<int> votes(k, 1);
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            const Index j = S3[a];
            const Index l = S3[b];
            const double diff = std::abs(ratios.at(l) - ratios.at(j));
            if (diff / se_fn(j, l) <= thr) {
                ++votes[a];
                ++votes[b];
            }
        }
    }
    ModeResult out;
    const int best = *std::max_element(votes.begin(), votes.end());
    for (std::size_t a = 0; a < k; ++a) {
        out.vote_counts[S3[a]] = votes[a];
        if (votes[a] == best) out.S4.push_back(S3[a]);
    }
    return out;
}

NaiveVote vote_naive(const IndexList& S2, const Vector& gamma_hat, const Vector& Gamma_hat, const Matrix& M,
                     const Thetas& th, const ThresholdPolicy& policy, Diagnostics* diag) {
    if (S2.empty()) throw PreconditionError("naive voting needs a nonempty candidate set");
    const double thr = policy.mode_threshold();
    const double n = static_cast<double>(policy.n);
    for (Index l : S2)
        if (gamma_hat(l) == 0.0) throw DegeneracyError("exposure estimate is zero at position " + std::to_string(l + 1));

    const std::size_t k = S2.size();
    std::vector<int> votes(k, 0);
    bool floored = false;
    for (std::size_t lv = 0; lv < k; ++lv) {
        const Index l = S2[lv];
        const double gl = gamma_hat(l);
        const double bl = Gamma_hat(l) / gl;
        for (std::size_t jc = 0; jc < k; ++jc) {
            const Index j = S2[jc];
            if (j == l) {
                ++votes[jc];
                continue;
            }
            const double gj = gamma_hat(j);
            const double stat = Gamma_hat(j) - gj * bl;
            // Gradients with respect to (gamma_j, gamma_l) and (Gamma_j, Gamma_l).
            const double aj = -bl;
            const double al = gj * bl / gl;
            const double bj = 1.0;
            const double blg = -gj / gl;
            const double mjj = M(j, j);
            const double mll = M(l, l);
            const double mjl = 0.5 * (M(j, l) + M(l, j));
            const double aMa = aj * aj * mjj + 2.0 * aj * al * mjl + al * al * mll;
            const double aMb = aj * bj * mjj + (aj * blg + al * bj) * mjl + al * blg * mll;
            const double bMb = bj * bj * mjj + 2.0 * bj * blg * mjl + blg * blg * mll;
            const double var = (th.t22 * aMa + 2.0 * th.t12 * aMb + th.t11 * bMb) / n;
            double se = 1e-12;
            if (var > 0.0 && std::isfinite(var)) {
                se = std::sqrt(var);
            } else {
                floored = true;
            }
            if (std::abs(stat) / se <= thr) ++votes[jc];
        }
    }
    if (floored) warn_to(diag, "naive", "nonpositive voting variance floored at 1e-12");
    NaiveVote out;
    const int best = *std::max_element(votes.begin(), votes.end());
    for (std::size_t a = 0; a < k; ++a) {
        out.vote_counts[S2[a]] = votes[a];
        if (votes[a] == best) out.winners.push_back(S2[a]);
    }
    return out;
}

}  // namespace ivpseudo
