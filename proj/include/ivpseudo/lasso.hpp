#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "ivpseudo/dataset.hpp"
#include "ivpseudo/diagnostics.hpp"
#include "ivpseudo/rng.hpp"

namespace ivpseudo {

struct LassoOptions {
    double tol = 1e-7;
    int max_iter = 10000;
};

struct LassoFit {
    Vector coefficients;
    double lambda = 0.0;
    double objective_value = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct NodewisePrecision {
    Matrix M;
    Vector tau2;
    Matrix thetas;  // row j holds the coefficients of X_j on X_{-j}, with a 0 at column j
    Vector lambdas;
};

struct DebiasedFit {
    Vector estimates;
    Vector ses;
    double residual_ss_over_n = 0.0;
    LassoFit lasso;
};

struct Thetas {
    double t11 = 0.0;
    double t22 = 0.0;
    double t12 = 0.0;
};

struct FixedLambda {
    double lambda = 0.0;
};

struct CrossValidatedLambda {
    int folds = 10;
    int grid_size = 20;
    double min_ratio = 0.005;
    /// The path stops once the pooled error has exceeded its running minimum
    /// at this many consecutive grid points (0 = evaluate the whole grid).
    int patience = 2;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

using NodewisePolicy = std::variant<FixedLambda, CrossValidatedLambda>;

/// Minimizes ||y - X b||^2 / n + 2 lambda ||b||_1 by cyclic coordinate descent.
/// Stops when the largest coefficient change in a sweep is <= tol.
/// `objective_trace`, if given, receives the objective after every sweep.
LassoFit fit_lasso(const Matrix& X, const Vector& y, double lambda, const LassoOptions& opts = {},
                   std::vector<double>* objective_trace = nullptr, const Vector* warm_start = nullptr);

/// Same problem expressed through G = X'X/n, c = X'y/n and yy = y'y/n.
LassoFit fit_lasso_gram(const Matrix& G, const Vector& c, double yy, double lambda,
                        const LassoOptions& opts = {}, std::vector<double>* objective_trace = nullptr,
                        const Vector* warm_start = nullptr);

double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda);

/// Largest lambda for which the solution is nonzero: max_j |X_j' y / n|.
double lambda_max(const Matrix& X, const Vector& y);

NodewisePrecision fit_nodewise(const Matrix& X, const NodewisePolicy& policy,
                               const LassoOptions& opts = {}, Diagnostics* diag = nullptr);

/// Pooled cross-validation over all s nodewise regressions; returns the shared lambda.
double nodewise_cv_lambda(const Matrix& X, const CrossValidatedLambda& cv, const LassoOptions& opts = {});

DebiasedFit debias(const LassoFit& lasso, const Matrix& M, const Matrix& X, const Vector& y,
                   Diagnostics* diag = nullptr);
inline DebiasedFit debias(const LassoFit& lasso, const NodewisePrecision& precision, const Matrix& X,
                          const Vector& y, Diagnostics* diag = nullptr) {
    return debias(lasso, precision.M, X, y, diag);
}

Thetas theta_hats(const Matrix& X, const Vector& D, const Vector& Y, const Vector& gamma_tilde,
                  const Vector& Gamma_tilde);

}  // namespace ivpseudo
