#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ivpseudo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Dataset {
    Matrix Z;
    Vector D;
    Vector Y;
    std::optional<Matrix> X;
    std::vector<bool> pseudo_mask;
    bool centered = false;

    std::vector<std::string> z_names;
    std::vector<std::string> x_names;

    Index n() const { return Z.rows(); }
    Index p() const { return Z.cols(); }

    /// Throws DimensionError / DataError when the invariants do not hold.
    void validate() const;
};

Dataset make_dataset(Matrix Z, Vector D, Vector Y, std::optional<Matrix> X = std::nullopt);

/// Header row required; every column not named as exposure, outcome or a
/// covariate becomes a column of Z in file order.
Dataset load_csv(const std::string& path, const std::string& exposure_col,
                 const std::string& outcome_col,
                 const std::vector<std::string>& covariate_cols = {});

Dataset parse_csv(const std::string& text, const std::string& exposure_col,
                  const std::string& outcome_col,
                  const std::vector<std::string>& covariate_cols = {});

/// Columns: exposure, outcome, covariates, then Z. Values use %.17g.
void write_csv(const Dataset& ds, const std::string& path, const std::string& exposure_col = "D",
               const std::string& outcome_col = "Y");
std::string to_csv(const Dataset& ds, const std::string& exposure_col = "D",
                   const std::string& outcome_col = "Y");

Dataset center(const Dataset& ds);

/// Divides every Z column by its sample standard deviation (divisor n).
/// Zero-variance columns are left untouched.
Dataset scale_columns(const Dataset& ds);

/// Replaces Z, D, Y by their residuals on X and drops X.
Dataset partial_out_covariates(const Dataset& ds);

std::string format_double(double v);

}  // namespace ivpseudo
