#pragma once

#include "json.hpp"

#include "ivpseudo/estimation.hpp"
#include "ivpseudo/lasso.hpp"
#include "ivpseudo/pipeline.hpp"
#include "ivpseudo/selection.hpp"

namespace ivpseudo {

nlohmann::json to_json(const LassoFit& fit);
nlohmann::json to_json(const DebiasedFit& fit);
nlohmann::json to_json(const CausalEstimate& est);
/// Column ids are 1-based; pseudo copies of column k are reported as p + k.
nlohmann::json to_json(const SelectionTrace& trace, Index p_real);
nlohmann::json to_json(const PipelineResult& result, bool include_timing = true);

}  // namespace ivpseudo
