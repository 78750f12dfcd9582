#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "ivpseudo/dataset.hpp"
#include "ivpseudo/rng.hpp"

namespace ivpseudo {

/// Sparse coefficient entry; index is 1-based.
struct SparseEntry {
    Index index = 0;
    double value = 0.0;
};

enum class BlockType { ar1, equicorr, cross, confounder };

/// Correlation structure applied to a contiguous (1-based, inclusive) range of
/// Z columns. Ranges past p are truncated.
///   ar1        [Sigma]_jk = rho^|j-k| within the range
///   equicorr   all pairs within the range correlated at rho
///   cross      each column in range = rho * Z_source + sqrt(1 - rho^2) * noise
///   confounder column `source` correlated at rho with U component `component`
struct CovBlock {
    BlockType type = BlockType::ar1;
    Index first = 0;
    Index last = 0;
    Index source = 0;
    Index component = 1;
    double rho = 0.0;
};

struct ScenarioConfig {
    std::string name = "custom";
    Index n = 500;
    Index p = 2000;
    double beta_star = 2.0;
    std::vector<SparseEntry> gamma;
    std::vector<SparseEntry> pi;
    Vector alpha_D = Vector::Constant(1, 4.0);
    Vector alpha_Y = Vector::Constant(1, -3.0);
    Matrix Sigma_U = Matrix::Identity(1, 1);
    double sigma_D2 = 0.0;
    double sigma_Y2 = 1.0;
    std::vector<CovBlock> z_blocks;
    Vector psi;
    Vector phi;
    std::uint64_t seed = 0;

    /// Throws ConfigError on inconsistent fields.
    void validate() const;
    Vector gamma_dense() const;
    Vector pi_dense() const;
};

struct Latents {
    Matrix U;
    Vector eps_D;
    Vector eps_Y;
};

Dataset gen_dataset(const ScenarioConfig& cfg, RngStream& rng, Latents* latents = nullptr);

const std::vector<std::string>& preset_names();
/// p_override <= 0 keeps the published dimension.
ScenarioConfig preset(const std::string& name, Index p_override = 0);

double c_star(const ScenarioConfig& cfg);
double c_tilde(const ScenarioConfig& cfg);

enum class ColumnClass { valid, invalid, irrelevant, pseudo };
const char* to_string(ColumnClass c);

/// Class of a 0-based column of the expanded matrix [Z, Z_pseudo] (columns >= p are pseudo).
ColumnClass classify_column(const ScenarioConfig& cfg, Index column);
/// Same lookup for all p real columns at once.
std::vector<ColumnClass> classify_columns(const ScenarioConfig& cfg);

nlohmann::json to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const nlohmann::json& j);
/// Applies "key=value" where value is parsed as JSON (falls back to a string).
void apply_override(nlohmann::json& cfg_json, const std::string& assignment);

}  // namespace ivpseudo
