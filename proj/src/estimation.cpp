#include "ivpseudo/estimation.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "ivpseudo/errors.hpp"

namespace ivpseudo {

const char* to_string(EstimateMethod m) {
    switch (m) {
        case EstimateMethod::tsls: return "tsls";
        case EstimateMethod::split: return "split";
        case EstimateMethod::ols: return "ols";
    }
    return "unknown";
}

double normal_critical(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    static const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
    return boost::math::quantile(std_normal, 1.0 - alpha / 2.0);
}

namespace {

CausalEstimate make_estimate(double beta, double se, double alpha, EstimateMethod method, Index n) {
    CausalEstimate est;
    est.beta_hat = beta;
    est.se = se;
    est.alpha = alpha;
    est.method = method;
    est.n_used = n;
    const double half = normal_critical(alpha) * se;
    est.ci_low = beta - half;
    est.ci_high = beta + half;
    return est;
}

}  // namespace

CausalEstimate tsls(const Matrix& Z, const Vector& D, const Vector& Y, double alpha, Diagnostics* diag) {
    const Index n = Z.rows();
    if (Z.cols() < 1) throw DimensionError("2SLS needs at least one instrument");
    if (D.size() != n || Y.size() != n) throw DimensionError("row counts disagree");
    Eigen::ColPivHouseholderQR<Matrix> qr(Z);
    if (qr.rank() < Z.cols()) throw LinearAlgebraError("instrument matrix Z'Z is singular");
    // P v = Z (Z'Z)^{-1} Z' v = Z * lstsq(Z, v)
    const Vector PD = Z * qr.solve(D);
    const double dpd = D.dot(PD);
    if (!(dpd > 1e-12)) throw DegeneracyError("weak instruments: D'PD <= 1e-12");
    const double beta = PD.dot(Y) / dpd;
    const double sigma2 = (Y - beta * D).squaredNorm() / static_cast<double>(n);
    double var = sigma2 / dpd;
    if (!(var > 1e-12)) {
        warn_to(diag, "tsls", "degenerate 2SLS variance floored at 1e-12");
        var = 1e-12;
    }
    return make_estimate(beta, std::sqrt(var), alpha, EstimateMethod::tsls, n);
}

CausalEstimate ols(const Vector& x, const Vector& y, double alpha, Diagnostics* diag) {
    const Index n = x.size();
    if (y.size() != n) throw DimensionError("x and y differ in length");
    if (n < 2) throw DimensionError("OLS needs at least 2 observations");
    const Vector xc = x.array() - x.mean();
    const Vector yc = y.array() - y.mean();
    const double sxx = xc.squaredNorm();
    if (!(sxx > 0.0)) throw DegeneracyError("regressor has zero variance");
    const double slope = xc.dot(yc) / sxx;
    const double sigma2 = (yc - slope * xc).squaredNorm() / static_cast<double>(n);
    double var = sigma2 / sxx;
    if (!(var > 1e-12)) {
        warn_to(diag, "ols", "degenerate OLS variance floored at 1e-12");
        var = 1e-12;
    }
    return make_estimate(slope, std::sqrt(var), alpha, EstimateMethod::ols, n);
}

Matrix split_weight_matrix(const Matrix& Sigma, const IndexList& S4) {
    const Index q = Sigma.rows();
    if (Sigma.cols() != q) throw DimensionError("covariance must be square");
    std::vector<bool> in(static_cast<std::size_t>(q), false);
    for (Index j : S4) {
        if (j < 0 || j >= q) throw DimensionError("S4 position out of range");
        in[static_cast<std::size_t>(j)] = true;
    }
    IndexList comp;
    for (Index j = 0; j < q; ++j)
        if (!in[static_cast<std::size_t>(j)]) comp.push_back(j);
    const Matrix A = Sigma(S4, S4);
    if (comp.empty()) return A;
    const Matrix B = Sigma(S4, comp);
    const Matrix C = Sigma(comp, comp);
    Eigen::ColPivHouseholderQR<Matrix> qr(C);
    if (qr.rank() < C.cols()) throw LinearAlgebraError("complement block of the covariance is singular");
    Matrix W = A - B * qr.solve(B.transpose());
    return 0.5 * (W + W.transpose());
}

double split_estimator(const Vector& gamma2, const Vector& Gamma2, const Matrix& W, const IndexList& S4) {
    const auto k = static_cast<Index>(S4.size());
    if (W.rows() != k || W.cols() != k) throw DimensionError("weight matrix does not match S4");
    const Vector g = gamma2(S4);
    const Vector G = Gamma2(S4);
    const double den = g.dot(W * g);
    if (den == 0.0 || !std::isfinite(den)) throw DegeneracyError("split estimator denominator is zero");
    return g.dot(W * G) / den;
}

double split_variance(double beta, const Vector& gamma2, const Matrix& W, const IndexList& S4, const Thetas& th,
                      Diagnostics* diag) {
    const auto k = static_cast<Index>(S4.size());
    if (W.rows() != k || W.cols() != k) throw DimensionError("weight matrix does not match S4");
    const Vector g = gamma2(S4);
    const double den = g.dot(W * g);
    if (!(den > 0.0)) throw DegeneracyError("split variance denominator is not positive");
    double num = th.t11 + beta * beta * th.t22 - 2.0 * beta * th.t12;
    if (!(num > 1e-12)) {
        warn_to(diag, "split", "nonpositive split variance numerator floored at 1e-12");
        num = 1e-12;
    }
    return num / den;
}

CausalEstimate split_ci(double beta, double v, Index n2, double alpha) {
    if (!(v >= 0.0)) throw ConfigError("split variance must be >= 0");
    if (n2 < 1) throw ConfigError("second-half size must be >= 1");
    return make_estimate(beta, std::sqrt(v / static_cast<double>(n2)), alpha, EstimateMethod::split, n2);
}

}  // namespace ivpseudo
