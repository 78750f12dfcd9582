#include "ivpseudo/serialize.hpp"

namespace ivpseudo {

using nlohmann::json;

namespace {

json vec(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json candidates(const IndexList& positions, const SelectionTrace& tr, Index p_real) {
    json a = json::array();
    for (Index pos : positions) {
        const Index col = tr.S1[static_cast<std::size_t>(pos)];
        json o;
        o["position"] = pos + 1;
        o["column_id"] = col + 1;
        o["is_pseudo"] = col >= p_real;
        if (auto it = tr.ratios.find(pos); it != tr.ratios.end()) o["ratio"] = it->second;
        if (auto it = tr.vote_counts.find(pos); it != tr.vote_counts.end()) o["votes"] = it->second;
        a.push_back(o);
    }
    return a;
}

}  // namespace

json to_json(const LassoFit& fit) {
    json j;
    j["coefficients"] = vec(fit.coefficients);
    j["lambda"] = fit.lambda;
    j["objective_value"] = fit.objective_value;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j;
}

json to_json(const DebiasedFit& fit) {
    json j;
    j["estimates"] = vec(fit.estimates);
    j["ses"] = vec(fit.ses);
    j["residual_ss_over_n"] = fit.residual_ss_over_n;
    j["lasso"] = to_json(fit.lasso);
    return j;
}

json to_json(const CausalEstimate& est) {
    json j;
    j["beta_hat"] = est.beta_hat;
    j["se"] = est.se;
    j["ci_low"] = est.ci_low;
    j["ci_high"] = est.ci_high;
    j["alpha"] = est.alpha;
    j["method"] = to_string(est.method);
    j["n_used"] = est.n_used;
    json inst = json::array();
    for (Index c : est.instruments_used) inst.push_back(c + 1);
    j["instruments_used"] = inst;
    return j;
}

json to_json(const SelectionTrace& tr, Index p_real) {
    json j;
    json s1 = json::array();
    for (Index c : tr.S1) s1.push_back(c + 1);
    j["S1"] = s1;
    j["S2"] = candidates(tr.S2, tr, p_real);
    j["S3"] = candidates(tr.S3, tr, p_real);
    j["S4"] = candidates(tr.S4, tr, p_real);
    if (tr.pseudo_range) {
        j["pseudo_range"] = json::array({tr.pseudo_range->lo, tr.pseudo_range->hi});
    } else {
        j["pseudo_range"] = nullptr;
    }
    j["pseudo_count_in_S1"] = tr.pseudo_positions.size();
    return j;
}

json to_json(const PipelineResult& r, bool include_timing) {
    json j;
    j["method"] = to_string(r.method);
    j["trace"] = to_json(r.trace, r.p_real);
    j["estimate"] = r.estimate ? to_json(*r.estimate) : json(nullptr);
    json d = json::array();
    for (const auto& w : r.diagnostics.items()) d.push_back({{"stage", w.stage}, {"message", w.message}});
    j["diagnostics"] = d;
    if (r.method == Method::split) {
        j["n1"] = r.n1;
        j["n2"] = r.n2;
    }
    if (include_timing) {
        json t = json::object();
        for (const auto& s : r.timing) t[s.stage] = s.seconds;
        j["timing"] = t;
    }
    return j;
}

}  // namespace ivpseudo
