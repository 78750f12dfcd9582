#pragma once

#include <string>

#include "ivpseudo/dataset.hpp"
#include "ivpseudo/diagnostics.hpp"
#include "ivpseudo/lasso.hpp"
#include "ivpseudo/selection.hpp"

namespace ivpseudo {

enum class EstimateMethod { tsls, split, ols };

const char* to_string(EstimateMethod m);

struct CausalEstimate {
    double beta_hat = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double alpha = 0.05;
    EstimateMethod method = EstimateMethod::tsls;
    Index n_used = 0;
    IndexList instruments_used;

    bool covers(double beta) const { return ci_low <= beta && beta <= ci_high; }
};

/// z_{1 - alpha/2}
double normal_critical(double alpha);

CausalEstimate tsls(const Matrix& Z_valid, const Vector& D, const Vector& Y, double alpha = 0.05,
                    Diagnostics* diag = nullptr);

CausalEstimate ols(const Vector& x, const Vector& y, double alpha = 0.05, Diagnostics* diag = nullptr);

/// Schur complement of the S4c block of Sigma_hat; positions are 0-based within 0..q-1.
Matrix split_weight_matrix(const Matrix& Sigma_hat, const IndexList& S4);

/// gamma2 and Gamma2 are full q-vectors; only the S4 entries enter.
double split_estimator(const Vector& gamma2, const Vector& Gamma2, const Matrix& W, const IndexList& S4);

double split_variance(double beta_split, const Vector& gamma2, const Matrix& W, const IndexList& S4,
                      const Thetas& thetas, Diagnostics* diag = nullptr);

CausalEstimate split_ci(double beta_split, double v_split, Index n2, double alpha = 0.05);

}  // namespace ivpseudo
