#include <cmath>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "support.hpp"

#include "ivpseudo/errors.hpp"
#include "ivpseudo/lasso.hpp"
#include "ivpseudo/serialize.hpp"

using namespace ivpseudo;
using testsupport::centered;
using testsupport::gaussian;
using testsupport::gaussian_vec;

namespace {

// |X_j'(y - Xb)/n| <= lambda + slack everywhere, = lambda * sign(b_j) on the support.
double kkt_violation(const Matrix& X, const Vector& y, const Vector& b, double lambda) {
    const Vector g = X.transpose() * (y - X * b) / static_cast<double>(X.rows());
    double worst = 0.0;
    for (Index j = 0; j < b.size(); ++j) {
        if (b(j) != 0.0) {
            worst = std::max(worst, std::abs(g(j) - lambda * (b(j) > 0 ? 1.0 : -1.0)));
        } else {
            worst = std::max(worst, std::abs(g(j)) - lambda);
        }
    }
    return worst;
}

Matrix correlated_design(Index n, Index s, double rho, std::uint64_t seed) {
    Matrix E = gaussian(n, s, seed);
    for (Index j = 1; j < s; ++j) E.col(j) = rho * E.col(j - 1) + std::sqrt(1 - rho * rho) * E.col(j);
    return centered(E);
}

}  // namespace

TEST_CASE("lambda at or above lambda_max gives the zero vector") {
    const Matrix X = centered(gaussian(30, 4, 1));
    const Vector y = centered(gaussian_vec(30, 2));
    const double lmax = lambda_max(X, y);
    CHECK(lmax == doctest::Approx((X.transpose() * y).cwiseAbs().maxCoeff() / 30.0));
    CHECK(fit_lasso(X, y, lmax).coefficients.cwiseAbs().maxCoeff() == 0.0);
    CHECK(fit_lasso(X, y, 2 * lmax).coefficients.cwiseAbs().maxCoeff() == 0.0);
    CHECK(fit_lasso(X, y, 0.9 * lmax).coefficients.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("orthonormal design reduces to soft thresholding") {
    // Columns orthogonal with X'X/n = I.
    Matrix X(4, 2);
    X << 1, 1, 1, -1, -1, 1, -1, -1;
    Vector z(2);
    z << 0.9, 0.1;
    const Vector y = X * z;
    const LassoFit fit = fit_lasso(X, y, 0.2);
    CHECK(fit.converged);
    CHECK(fit.coefficients(0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(fit.coefficients(1) == 0.0);
}

TEST_CASE("three-column lasso matches the brute-force grid minimizer") {
    const Matrix X = centered(gaussian(20, 3, 7));
    Vector truth(3);
    truth << 1.0, -0.5, 0.0;
    const Vector y = centered(Vector(X * truth + 0.5 * gaussian_vec(20, 8)));
    const LassoFit fit = fit_lasso(X, y, 0.1);
    const Vector grid = oracle::oracle_lasso_refined(X, y, 0.1, -3.0, 3.0, 0.02, 1e-3);
    CHECK((fit.coefficients - grid).cwiseAbs().maxCoeff() <= 2e-3);
    CHECK(fit.objective_value <= oracle::lasso_objective(X, y, grid, 0.1) + 1e-12);
}

TEST_CASE("converged fits satisfy the KKT certificate and report their objective") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix X = correlated_design(40, 8, 0.6, 100 + seed);
        const Vector y = centered(Vector(X.col(0) * 2.0 - X.col(3) + gaussian_vec(40, 200 + seed)));
        const double lambda = lambda_max(X, y) * (0.05 + 0.04 * static_cast<double>(seed));
        const LassoFit fit = fit_lasso(X, y, lambda);
        REQUIRE(fit.converged);
        CHECK(kkt_violation(X, y, fit.coefficients, lambda) <= 10 * LassoOptions{}.tol);
        CHECK(std::abs(fit.objective_value - oracle::lasso_objective(X, y, fit.coefficients, lambda)) <= 1e-10);
    }
}

TEST_CASE("coordinate descent objective never increases across sweeps") {
    const Matrix X = correlated_design(25, 10, 0.8, 5);
    const Vector y = centered(gaussian_vec(25, 6));
    std::vector<double> trace;
    fit_lasso(X, y, 0.01, LassoOptions{}, &trace);
    REQUIRE(trace.size() > 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-14);
}

TEST_CASE("scaling y and lambda together scales the coefficients") {
    const Matrix X = correlated_design(30, 5, 0.4, 9);
    const Vector y = centered(gaussian_vec(30, 10));
    const double c = 3.7;
    const LassoOptions tight{1e-12, 100000};
    const LassoFit a = fit_lasso(X, y, 0.05, tight);
    const LassoFit b = fit_lasso(X, Vector(c * y), c * 0.05, tight);
    CHECK((b.coefficients - c * a.coefficients).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("iteration cap returns an unconverged fit instead of throwing") {
    const Matrix X = correlated_design(30, 6, 0.95, 3);
    const Vector y = centered(gaussian_vec(30, 4));
    const LassoFit fit = fit_lasso(X, y, 1e-4, LassoOptions{1e-12, 2});
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 2);
}

TEST_CASE("zero-variance column with lambda 0 is a singularity error") {
    Matrix X = centered(gaussian(10, 2, 1));
    X.col(1).setZero();
    CHECK_THROWS_AS(fit_lasso(X, centered(gaussian_vec(10, 2)), 0.0), LinearAlgebraError);
    CHECK_NOTHROW(fit_lasso(X, centered(gaussian_vec(10, 2)), 0.1));
    CHECK_THROWS_AS(fit_lasso(X, centered(gaussian_vec(10, 2)), -1.0), ConfigError);
}

TEST_CASE("nodewise lasso on orthogonal columns is diagonal") {
    Matrix X(4, 3);
    X << 1, 1, 2, 1, -1, -2, -1, 1, -2, -1, -1, 2;
    const NodewisePrecision P = fit_nodewise(X, FixedLambda{0.1});
    CHECK(P.thetas.cwiseAbs().maxCoeff() == 0.0);
    for (Index j = 0; j < 3; ++j) {
        CHECK(P.tau2(j) == doctest::Approx(X.col(j).squaredNorm() / 4.0));
        CHECK(P.M(j, j) == doctest::Approx(4.0 / X.col(j).squaredNorm()));
    }
    CHECK((P.M - Matrix(P.M.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("each nodewise regression matches its own grid oracle") {
    const Matrix X = correlated_design(40, 3, 0.7, 17);
    const double lambda = 0.05;
    const NodewisePrecision P = fit_nodewise(X, FixedLambda{lambda});
    for (Index j = 0; j < 3; ++j) {
        Matrix rest(40, 2);
        Index c = 0;
        for (Index k = 0; k < 3; ++k)
            if (k != j) rest.col(c++) = X.col(k);
        const Vector grid = oracle::oracle_lasso_refined(rest, X.col(j), lambda, -3.0, 3.0, 0.01, 1e-3);
        c = 0;
        for (Index k = 0; k < 3; ++k) {
            if (k == j) {
                CHECK(P.thetas(j, k) == 0.0);
                continue;
            }
            CHECK(std::abs(P.thetas(j, k) - grid(c++)) <= 2e-3);
        }
        const Vector theta = P.thetas.row(j).transpose();
        const double rss = (X.col(j) - X * theta).squaredNorm() / 40.0;
        CHECK(std::abs(P.tau2(j) - (rss + lambda * theta.lpNorm<1>())) <= 1e-10);
        for (Index k = 0; k < 3; ++k) {
            const double expected = (k == j ? 1.0 : -theta(k)) / P.tau2(j);
            CHECK(std::abs(P.M(j, k) - expected) <= 1e-12);
        }
    }
}

TEST_CASE("identical columns at lambda 0 are degenerate") {
    Matrix X(5, 2);
    X.col(0) << -2, -1, 0, 1, 2;
    X.col(1) = X.col(0);
    CHECK_THROWS_AS(fit_nodewise(X, FixedLambda{0.0}), DegeneracyError);
    CHECK_THROWS_AS(fit_nodewise(X.leftCols(1), FixedLambda{0.1}), DimensionError);
}

TEST_CASE("pooled cross-validation picks the argmin of an explicit fold-by-fold loss") {
    const Index n = 36, s = 4;
    const Matrix X = correlated_design(n, s, 0.5, 41);
    CrossValidatedLambda cv;
    cv.folds = 3;
    cv.grid_size = 6;
    cv.min_ratio = 0.01;
    cv.patience = 0;
    cv.seed = 77;
    cv.stream = 3;
    const double chosen = nodewise_cv_lambda(X, cv);

    // Independent recomputation: explicit training rows, library-free normal equations are not
    // needed because each training problem is solved with fit_lasso on the raw training rows.
    double lmax = 0.0;
    const Matrix G = X.transpose() * X / static_cast<double>(n);
    for (Index j = 0; j < s; ++j)
        for (Index k = 0; k < s; ++k)
            if (j != k) lmax = std::max(lmax, std::abs(G(j, k)));
    const auto perm = RngStream(cv.seed, cv.stream).permutation(static_cast<std::size_t>(n));
    std::vector<double> err(static_cast<std::size_t>(cv.grid_size), 0.0);
    std::vector<double> grid;
    for (int g = 0; g < cv.grid_size; ++g) grid.push_back(lmax * std::pow(cv.min_ratio, g / double(cv.grid_size - 1)));
    for (int f = 0; f < cv.folds; ++f) {
        std::vector<Index> test, train;
        for (std::size_t i = 0; i < perm.size(); ++i)
            (static_cast<int>(i % cv.folds) == f ? test : train).push_back(static_cast<Index>(perm[i]));
        Matrix Xtr(static_cast<Index>(train.size()), s), Xte(static_cast<Index>(test.size()), s);
        for (std::size_t r = 0; r < train.size(); ++r) Xtr.row(static_cast<Index>(r)) = X.row(train[r]);
        for (std::size_t r = 0; r < test.size(); ++r) Xte.row(static_cast<Index>(r)) = X.row(test[r]);
        for (Index j = 0; j < s; ++j) {
            Matrix rest(Xtr.rows(), s - 1), rest_te(Xte.rows(), s - 1);
            Index c = 0;
            for (Index k = 0; k < s; ++k)
                if (k != j) {
                    rest.col(c) = Xtr.col(k);
                    rest_te.col(c++) = Xte.col(k);
                }
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const LassoFit fit = fit_lasso(rest, Xtr.col(j), grid[g], LassoOptions{1e-10, 100000});
                err[g] += (Xte.col(j) - rest_te * fit.coefficients).squaredNorm();
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t g = 1; g < err.size(); ++g)
        if (err[g] < err[best]) best = g;
    CHECK(chosen == doctest::Approx(grid[best]).epsilon(1e-12));

    std::size_t early_best = 0;
    for (std::size_t g = 1; g < err.size(); ++g) {
        if (err[g] < err[early_best]) early_best = g;
        if (g - early_best >= 2) break;
    }
    cv.patience = 2;
    const double early = nodewise_cv_lambda(X, cv);
    CHECK(early == doctest::Approx(grid[early_best]).epsilon(1e-12));
    CHECK(nodewise_cv_lambda(X, cv) == early);
}

TEST_CASE("debiasing with the exact inverse covariance reproduces OLS") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix X = correlated_design(40, 4, 0.3, 300 + seed);
        const Vector y = centered(Vector(X.col(1) - 0.5 * X.col(2) + gaussian_vec(40, 400 + seed)));
        const Matrix Sigma = X.transpose() * X / 40.0;
        const Matrix M = oracle::gauss_inverse(Sigma);
        const LassoFit lasso = fit_lasso(X, y, 0.05 + 0.03 * static_cast<double>(seed));
        const DebiasedFit d = debias(lasso, M, X, y);
        CHECK((d.estimates - oracle::oracle_ols(X, y)).cwiseAbs().maxCoeff() <= 1e-8);
        const Vector recomputed = lasso.coefficients + M * X.transpose() * (y - X * lasso.coefficients) / 40.0;
        CHECK((d.estimates - recomputed).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((d.ses.array() > 0.0).all());
    }
}

TEST_CASE("debiasing an OLS fit changes nothing") {
    const Matrix X = correlated_design(30, 3, 0.2, 55);
    const Vector y = centered(gaussian_vec(30, 56));
    LassoFit at_ols;
    at_ols.coefficients = oracle::oracle_ols(X, y);
    const Matrix M = centered(gaussian(3, 3, 57));
    const DebiasedFit d = debias(at_ols, M, X, y);
    CHECK((d.estimates - at_ols.coefficients).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("exact fit floors the standard errors with a warning") {
    const Matrix X = correlated_design(12, 2, 0.1, 61);
    Vector b(2);
    b << 1.0, -2.0;
    const Vector y = X * b;
    LassoFit fit;
    fit.coefficients = b;
    Diagnostics diag;
    const DebiasedFit d = debias(fit, Matrix::Identity(2, 2), X, y, &diag);
    CHECK(d.ses(0) == 1e-15);
    CHECK(d.ses(1) == 1e-15);
    CHECK(diag.contains("floored"));
}

TEST_CASE("debias standard errors follow the sandwich formula") {
    const Matrix X = correlated_design(50, 3, 0.4, 71);
    const Vector y = centered(gaussian_vec(50, 72));
    const NodewisePrecision P = fit_nodewise(X, FixedLambda{0.05});
    const LassoFit lasso = fit_lasso(X, y, 0.1);
    const DebiasedFit d = debias(lasso, P, X, y);
    const Matrix V = P.M * (X.transpose() * X / 50.0) * P.M.transpose();
    const double rss = (y - X * lasso.coefficients).squaredNorm() / 50.0;
    for (Index l = 0; l < 3; ++l) CHECK(d.ses(l) == doctest::Approx(std::sqrt(V(l, l) / 50.0 * rss)).epsilon(1e-12));
    CHECK_THROWS_AS(debias(lasso, Matrix::Identity(2, 2), X, y), DimensionError);
}

TEST_CASE("theta_hats from zero coefficients and symmetric inputs") {
    const Matrix X = gaussian(10, 2, 81);
    const Vector D = gaussian_vec(10, 82);
    const Vector Y = gaussian_vec(10, 83);
    const Thetas t = theta_hats(X, D, Y, Vector::Zero(2), Vector::Zero(2));
    CHECK(t.t11 == doctest::Approx(Y.squaredNorm() / 10));
    CHECK(t.t22 == doctest::Approx(D.squaredNorm() / 10));
    CHECK(t.t12 == doctest::Approx(Y.dot(D) / 10));
    Vector g(2);
    g << 0.3, -0.1;
    const Thetas s = theta_hats(X, D, D, g, g);
    CHECK(s.t11 == doctest::Approx(s.t22));
    CHECK(s.t12 == doctest::Approx(s.t22));
}

TEST_CASE("theta_hats five-observation hand example") {
    Matrix X(5, 1);
    X << 1, 2, 3, 4, 5;
    Vector D(5), Y(5);
    D << 2, 1, 4, 3, 6;
    Y << 1, 0, 2, 5, 3;
    Vector g(1), G(1);
    g << 1.0;
    G << 0.5;
    // rD = D - X = (1, -1, 1, -1, 1); rY = Y - 0.5 X = (0.5, -1, 0.5, 3, 0.5)
    const Thetas t = theta_hats(X, D, Y, g, G);
    CHECK(t.t22 == doctest::Approx(5.0 / 5));
    CHECK(t.t11 == doctest::Approx((0.25 + 1 + 0.25 + 9 + 0.25) / 5));
    CHECK(t.t12 == doctest::Approx((0.5 + 1 + 0.5 - 3 + 0.5) / 5));
}

TEST_CASE("fits serialize with the documented field names") {
    const Matrix X = correlated_design(20, 2, 0.1, 91);
    const Vector y = centered(gaussian_vec(20, 92));
    const LassoFit fit = fit_lasso(X, y, 0.05);
    const auto j = to_json(fit);
    CHECK(j.contains("coefficients"));
    CHECK(j.contains("lambda"));
    CHECK(j.contains("converged"));
    const auto jd = to_json(debias(fit, Matrix::Identity(2, 2), X, y));
    CHECK(jd.contains("estimates"));
    CHECK(jd.contains("ses"));
}
