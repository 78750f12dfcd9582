#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "ivpseudo/dataset.hpp"
#include "ivpseudo/diagnostics.hpp"
#include "ivpseudo/lasso.hpp"
#include "ivpseudo/rng.hpp"

namespace ivpseudo {

using IndexList = std::vector<Index>;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Positions in S2..S4, ratios, vote_counts and pseudo_positions refer to
/// positions within S1. S1 holds column indices of the expanded matrix
/// [Z, Z_pseudo] (0-based; column p + k is the pseudo copy of column k).
struct SelectionTrace {
    IndexList S1;
    IndexList S2;
    IndexList S3;
    IndexList S4;
    std::map<Index, double> ratios;
    std::optional<Interval> pseudo_range;
    std::map<Index, int> vote_counts;
    IndexList pseudo_positions;
};

struct ThresholdPolicy {
    double omega = 2.01;
    Index n = 0;
    Index s = 0;

    double log_scale() const;
    /// sqrt(omega * log(max(n, s)))
    double joint_delta() const;
    /// sqrt(omega^2 * log(max(n, s)))
    double mode_threshold() const;
};

/// Indices of the s largest |Z_j'D| / ||Z_j||^2, by decreasing statistic,
/// ties to the smaller index.
IndexList marginal_screen(const Matrix& Z, const Vector& D, Index s);
Vector marginal_statistics(const Matrix& Z, const Vector& D);

/// One uniformly random row permutation applied to the whole matrix.
Matrix generate_pseudos(const Matrix& Z, RngStream& rng);

IndexList joint_threshold(const Vector& estimates, const Vector& ses, const ThresholdPolicy& policy);
inline IndexList joint_threshold(const DebiasedFit& fit, const ThresholdPolicy& policy) {
    return joint_threshold(fit.estimates, fit.ses, policy);
}

std::map<Index, double> ratio_estimates(const Vector& gamma_hat, const Vector& Gamma_hat, const IndexList& S2);
inline std::map<Index, double> ratio_estimates(const DebiasedFit& gamma, const DebiasedFit& Gamma,
                                               const IndexList& S2) {
    return ratio_estimates(gamma.estimates, Gamma.estimates, S2);
}

struct SpuriousRemoval {
    IndexList S3;
    std::optional<Interval> pseudo_range;
};

SpuriousRemoval remove_spurious(const IndexList& S2, const std::map<Index, double>& ratios,
                                const std::set<Index>& pseudo_positions);

/// SE of the difference of two ratio estimates. `M` plays the role of the
/// precision estimate; its (j, l) entry is symmetrized so the result is
/// symmetric in (j, l).
double se_ratio_difference(Index j, Index l, const Vector& gamma_hat, const Vector& Gamma_hat, const Matrix& M,
                           const Thetas& thetas, Index n, Diagnostics* diag = nullptr);
inline double se_ratio_difference(Index j, Index l, const DebiasedFit& gamma, const DebiasedFit& Gamma,
                                  const NodewisePrecision& precision, const Thetas& thetas, Index n,
                                  Diagnostics* diag = nullptr) {
    return se_ratio_difference(j, l, gamma.estimates, Gamma.estimates, precision.M, thetas, n, diag);
}

using PairwiseSe = std::function<double(Index, Index)>;

struct ModeResult {
    IndexList S4;
    std::map<Index, int> vote_counts;
};

ModeResult mode_find(const IndexList& S3, const std::map<Index, double>& ratios, const PairwiseSe& se_fn,
                     const ThresholdPolicy& policy);

struct NaiveVote {
    IndexList winners;
    std::map<Index, int> vote_counts;
};

/// Voter l votes for j when |Gamma_j - gamma_j * Gamma_l / gamma_l| / SE <= mode threshold,
/// SE from the delta method on the same precision and Theta quantities.
NaiveVote vote_naive(const IndexList& S2, const Vector& gamma_hat, const Vector& Gamma_hat, const Matrix& M,
                     const Thetas& thetas, const ThresholdPolicy& policy, Diagnostics* diag = nullptr);
inline NaiveVote vote_naive(const IndexList& S2, const DebiasedFit& gamma, const DebiasedFit& Gamma,
                            const NodewisePrecision& precision, const Thetas& thetas,
                            const ThresholdPolicy& policy, Diagnostics* diag = nullptr) {
    return vote_naive(S2, gamma.estimates, Gamma.estimates, precision.M, thetas, policy, diag);
}

}  // namespace ivpseudo
