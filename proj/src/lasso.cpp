#include "ivpseudo/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ivpseudo/errors.hpp"

namespace ivpseudo {

namespace {

inline double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

struct CdOutcome {
    int iterations = 0;
    bool converged = false;
};

// grad holds c - G beta on entry and is kept current. Coordinate `skip` is
// held at zero (nodewise regressions).
CdOutcome coordinate_descent(const Matrix& G, const Vector& c, double yy, double lambda, Vector& beta,
                             Vector& grad, Index skip, const LassoOptions& opts,
                             std::vector<double>* trace) {
    const Index s = G.rows();
    CdOutcome out;
    auto objective = [&] {
        double obj = yy;
        for (Index k = 0; k < s; ++k) {
            if (beta(k) != 0.0) obj += -c(k) * beta(k) - grad(k) * beta(k) + 2.0 * lambda * std::abs(beta(k));
        }
        return obj;
    };
    if (trace != nullptr) trace->push_back(objective());
    // One coordinate update; returns |delta|.
    auto update = [&](Index k) -> double {
        const double gkk = G(k, k);
        if (!(gkk > 0.0)) {
            if (lambda == 0.0)
                throw LinearAlgebraError("column " + std::to_string(k + 1) + " has zero variance and lambda is 0");
            const double old = beta(k);
            if (old != 0.0) {
                grad.noalias() += G.col(k) * old;
                beta(k) = 0.0;
            }
            return std::abs(old);
        }
        const double old = beta(k);
        const double updated = soft_threshold(grad(k) + gkk * old, lambda) / gkk;
        const double delta = updated - old;
        if (delta != 0.0) {
            grad.noalias() -= G.col(k) * delta;
            beta(k) = updated;
        }
        return std::abs(delta);
    };
    // Full sweeps alternate with sweeps over the current support; convergence
    // is only declared after a full sweep.
    std::vector<Index> active;
    while (out.iterations < opts.max_iter) {
        ++out.iterations;
        double max_change = 0.0;
        for (Index k = 0; k < s; ++k)
            if (k != skip) max_change = std::max(max_change, update(k));
        if (trace != nullptr) trace->push_back(objective());
        if (max_change <= opts.tol) {
            out.converged = true;
            break;
        }
        active.clear();
        for (Index k = 0; k < s; ++k)
            if (k != skip && beta(k) != 0.0) active.push_back(k);
        while (out.iterations < opts.max_iter) {
            ++out.iterations;
            double change = 0.0;
            for (Index k : active) change = std::max(change, update(k));
            if (trace != nullptr) trace->push_back(objective());
            if (change <= opts.tol) break;
        }
    }
    return out;
}

void check_options(double lambda, const LassoOptions& opts) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
    if (!(opts.tol > 0.0)) throw ConfigError("tol must be positive");
    if (opts.max_iter < 1) throw ConfigError("max_iter must be >= 1");
}

}  // namespace

double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
    const double n = static_cast<double>(X.rows());
    return (y - X * beta).squaredNorm() / n + 2.0 * lambda * beta.lpNorm<1>();
}

double lambda_max(const Matrix& X, const Vector& y) {
    if (X.cols() == 0) return 0.0;
    return (X.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

LassoFit fit_lasso_gram(const Matrix& G, const Vector& c, double yy, double lambda, const LassoOptions& opts,
                        std::vector<double>* objective_trace, const Vector* warm_start) {
    check_options(lambda, opts);
    const Index s = G.rows();
    if (G.cols() != s || c.size() != s) throw DimensionError("Gram matrix and moment vector disagree");
    if (s < 1) throw DimensionError("lasso needs at least one column");
    Vector beta = Vector::Zero(s);
    if (warm_start != nullptr) {
        if (warm_start->size() != s) throw DimensionError("warm start has the wrong length");
        beta = *warm_start;
    }
    Vector grad = c - G * beta;
    const CdOutcome res = coordinate_descent(G, c, yy, lambda, beta, grad, -1, opts, objective_trace);
    LassoFit fit;
    fit.lambda = lambda;
    fit.iterations = res.iterations;
    fit.converged = res.converged;
    fit.objective_value = yy - c.dot(beta) - grad.dot(beta) + 2.0 * lambda * beta.lpNorm<1>();
    fit.coefficients = std::move(beta);
    return fit;
}

LassoFit fit_lasso(const Matrix& X, const Vector& y, double lambda, const LassoOptions& opts,
                   std::vector<double>* objective_trace, const Vector* warm_start) {
    if (X.rows() != y.size()) throw DimensionError("X and y have different row counts");
    if (X.rows() < 1) throw DimensionError("lasso needs at least one row");
    const double n = static_cast<double>(X.rows());
    const Matrix G = X.transpose() * X / n;
    const Vector c = X.transpose() * y / n;
    LassoFit fit = fit_lasso_gram(G, c, y.squaredNorm() / n, lambda, opts, objective_trace, warm_start);
    fit.objective_value = lasso_objective(X, y, fit.coefficients, lambda);
    return fit;
}

namespace {

struct NodewiseSolve {
    Vector theta;
    double rss = 0.0;  // ||x_j - X_{-j} theta||^2 / n
};

// warm/warm_grad carry theta and G_j - G theta along a lambda path.
NodewiseSolve solve_nodewise(const Matrix& G, Index j, double lambda, const LassoOptions& opts, Vector* warm,
                             Vector* warm_grad, bool* converged) {
    const Index s = G.rows();
    const Vector c = G.col(j);
    Vector theta = warm != nullptr ? *warm : Vector::Zero(s);
    Vector grad = warm_grad != nullptr ? *warm_grad : Vector(c - G * theta);
    const CdOutcome res = coordinate_descent(G, c, G(j, j), lambda, theta, grad, j, opts, nullptr);
    if (converged != nullptr) *converged = res.converged;
    NodewiseSolve out;
    out.rss = G(j, j) - c.dot(theta) - grad.dot(theta);
    if (warm != nullptr) *warm = theta;
    if (warm_grad != nullptr) *warm_grad = grad;
    out.theta = std::move(theta);
    return out;
}

double quadratic_residual(const Matrix& G, Index j, const Vector& theta) {
    // (e_j - theta)' G (e_j - theta) restricted to the nonzero entries.
    std::vector<Index> active;
    for (Index k = 0; k < theta.size(); ++k)
        if (theta(k) != 0.0) active.push_back(k);
    double v = G(j, j);
    for (Index a : active) v -= 2.0 * theta(a) * G(a, j);
    for (Index a : active)
        for (Index b : active) v += theta(a) * theta(b) * G(a, b);
    return v;
}

}  // namespace

double nodewise_cv_lambda(const Matrix& X, const CrossValidatedLambda& cv, const LassoOptions& opts) {
    const Index n = X.rows();
    const Index s = X.cols();
    if (s < 2) throw DimensionError("nodewise lasso needs at least 2 columns");
    if (cv.folds < 2 || cv.folds > n) throw ConfigError("cross-validation folds must lie in [2, n]");
    if (cv.grid_size < 1) throw ConfigError("cross-validation grid must be nonempty");
    const Matrix G = X.transpose() * X / static_cast<double>(n);
    double lmax = 0.0;
    for (Index j = 0; j < s; ++j)
        for (Index k = 0; k < s; ++k)
            if (k != j) lmax = std::max(lmax, std::abs(G(k, j)));
    if (lmax == 0.0) return 0.0;

    std::vector<double> grid(static_cast<std::size_t>(cv.grid_size));
    for (int g = 0; g < cv.grid_size; ++g) {
        const double t = cv.grid_size == 1 ? 0.0 : static_cast<double>(g) / (cv.grid_size - 1);
        grid[static_cast<std::size_t>(g)] = lmax * std::pow(cv.min_ratio, t);
    }

    RngStream rng(cv.seed, cv.stream);
    const auto perm = rng.permutation(static_cast<std::size_t>(n));
    std::vector<std::vector<Index>> fold_rows(static_cast<std::size_t>(cv.folds));
    for (std::size_t i = 0; i < perm.size(); ++i)
        fold_rows[i % static_cast<std::size_t>(cv.folds)].push_back(static_cast<Index>(perm[i]));

    const Matrix nG = G * static_cast<double>(n);
    struct Fold {
        Matrix St;
        Matrix Gtrain;
        Matrix theta;  // column j: warm start for node j
        Matrix grad;
    };
    std::vector<Fold> state;
    for (const auto& rows : fold_rows) {
        const auto nf = static_cast<Index>(rows.size());
        Matrix Xf(nf, s);
        for (Index r = 0; r < nf; ++r) Xf.row(r) = X.row(rows[static_cast<std::size_t>(r)]);
        Fold f;
        f.St = Xf.transpose() * Xf;
        f.Gtrain = (nG - f.St) / static_cast<double>(n - nf);
        f.theta = Matrix::Zero(s, s);
        f.grad = f.Gtrain;
        state.push_back(std::move(f));
    }

    std::vector<double> err;
    std::size_t best = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double e = 0.0;
        for (auto& f : state) {
            for (Index j = 0; j < s; ++j) {
                Vector warm = f.theta.col(j);
                Vector warm_grad = f.grad.col(j);
                const NodewiseSolve sol = solve_nodewise(f.Gtrain, j, grid[g], opts, &warm, &warm_grad, nullptr);
                e += quadratic_residual(f.St, j, sol.theta);
                f.theta.col(j) = warm;
                f.grad.col(j) = warm_grad;
            }
        }
        err.push_back(e);
        if (e < err[best]) best = g;
        if (cv.patience > 0 && g - best >= static_cast<std::size_t>(cv.patience)) break;
    }
    return grid[best];
}
NodewisePrecision fit_nodewise(const Matrix& X, const NodewisePolicy& policy, const LassoOptions& opts,
                               Diagnostics* diag) {
    const Index n = X.rows();
    const Index s = X.cols();
    if (s < 2) throw DimensionError("nodewise lasso needs at least 2 columns, got " + std::to_string(s));
    if (n < 2) throw DimensionError("nodewise lasso needs at least 2 rows");

    double lambda = 0.0;
    if (const auto* fixed = std::get_if<FixedLambda>(&policy)) {
        lambda = fixed->lambda;
    } else {
        lambda = nodewise_cv_lambda(X, std::get<CrossValidatedLambda>(policy), opts);
    }
    check_options(lambda, opts);

    const Matrix G = X.transpose() * X / static_cast<double>(n);
    NodewisePrecision out;
    out.M = Matrix::Zero(s, s);
    out.tau2 = Vector::Zero(s);
    out.thetas = Matrix::Zero(s, s);
    out.lambdas = Vector::Constant(s, lambda);
    for (Index j = 0; j < s; ++j) {
        bool converged = true;
        const NodewiseSolve sol = solve_nodewise(G, j, lambda, opts, nullptr, nullptr, &converged);
        if (!converged) warn_to(diag, "nodewise", "nodewise lasso for column " + std::to_string(j + 1) + " did not converge");
        const double tau2 = sol.rss + lambda * sol.theta.lpNorm<1>();
        if (!(tau2 > 1e-12))
            throw DegeneracyError("nodewise tau^2 for column " + std::to_string(j + 1) + " is " +
                                  std::to_string(tau2) + " (<= 1e-12)");
        out.tau2(j) = tau2;
        out.thetas.row(j) = sol.theta.transpose();
        out.M.row(j) = -sol.theta.transpose() / tau2;
        out.M(j, j) = 1.0 / tau2;
    }
    return out;
}

DebiasedFit debias(const LassoFit& lasso, const Matrix& M, const Matrix& X, const Vector& y, Diagnostics* diag) {
    const Index n = X.rows();
    const Index s = X.cols();
    if (y.size() != n) throw DimensionError("X and y have different row counts");
    if (lasso.coefficients.size() != s) throw DimensionError("lasso coefficients do not match X columns");
    if (M.rows() != s || M.cols() != s) throw DimensionError("precision matrix does not match X columns");
    const double nd = static_cast<double>(n);

    const Vector resid = y - X * lasso.coefficients;
    const Vector score = X.transpose() * resid / nd;
    DebiasedFit out;
    out.lasso = lasso;
    out.residual_ss_over_n = resid.squaredNorm() / nd;
    out.estimates = lasso.coefficients + M * score;

    const Matrix Sigma = X.transpose() * X / nd;
    const Matrix MS = M * Sigma;
    const Vector quad = MS.cwiseProduct(M).rowwise().sum();
    out.ses.resize(s);
    bool floored = false;
    for (Index l = 0; l < s; ++l) {
        const double v = quad(l) / nd * out.residual_ss_over_n;
        double se = v > 0.0 ? std::sqrt(v) : 0.0;
        if (!(se > 0.0) || !std::isfinite(se)) {
            se = 1e-15;
            floored = true;
        }
        out.ses(l) = se;
    }
    if (floored) warn_to(diag, "debias", "degenerate standard error floored at 1e-15");
    return out;
}

Thetas theta_hats(const Matrix& X, const Vector& D, const Vector& Y, const Vector& gamma_tilde,
                  const Vector& Gamma_tilde) {
    if (D.size() != X.rows() || Y.size() != X.rows()) throw DimensionError("row counts disagree");
    if (gamma_tilde.size() != X.cols() || Gamma_tilde.size() != X.cols())
        throw DimensionError("coefficient vectors do not match X columns");
    const double n = static_cast<double>(X.rows());
    const Vector rY = Y - X * Gamma_tilde;
    const Vector rD = D - X * gamma_tilde;
    return Thetas{rY.squaredNorm() / n, rD.squaredNorm() / n, rY.dot(rD) / n};
}

}  // namespace ivpseudo
