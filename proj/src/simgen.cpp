#include "ivpseudo/simgen.hpp"

#include <algorithm>
#include <cmath>

#include "ivpseudo/errors.hpp"

namespace ivpseudo {

namespace {

std::vector<SparseEntry> constant_entries(Index first, Index last, double value) {
    std::vector<SparseEntry> out;
    for (Index j = first; j <= last; ++j) out.push_back({j, value});
    return out;
}

Vector dense(const std::vector<SparseEntry>& entries, Index p) {
    Vector v = Vector::Zero(p);
    for (const auto& e : entries) v(e.index - 1) += e.value;
    return v;
}

const char* block_name(BlockType t) {
    switch (t) {
        case BlockType::ar1: return "ar1";
        case BlockType::equicorr: return "equicorr";
        case BlockType::cross: return "cross";
        case BlockType::confounder: return "confounder";
    }
    return "?";
}

BlockType block_from_name(const std::string& s) {
    if (s == "ar1") return BlockType::ar1;
    if (s == "equicorr") return BlockType::equicorr;
    if (s == "cross") return BlockType::cross;
    if (s == "confounder") return BlockType::confounder;
    throw ConfigError("unknown z block type '" + s + "' (expected ar1, equicorr, cross, confounder)");
}

}  // namespace

void ScenarioConfig::validate() const {
    if (n < 2) throw ConfigError("n must be >= 2");
    if (p < 1) throw ConfigError("p must be >= 1");
    const Index g = Sigma_U.rows();
    if (Sigma_U.cols() != g || g < 1) throw ConfigError("Sigma_U must be a nonempty square matrix");
    if (alpha_D.size() != g || alpha_Y.size() != g)
        throw ConfigError("alpha_D and alpha_Y must match the dimension of Sigma_U");
    if (!Sigma_U.isApprox(Sigma_U.transpose(), 1e-12)) throw ConfigError("Sigma_U must be symmetric");
    if (Sigma_U.llt().info() != Eigen::Success) throw ConfigError("Sigma_U must be positive definite");
    if (!(sigma_D2 >= 0.0) || !(sigma_Y2 >= 0.0)) throw ConfigError("error variances must be >= 0");
    if (psi.size() != phi.size()) throw ConfigError("psi and phi must have the same length");
    for (const auto* list : {&gamma, &pi})
        for (const auto& e : *list)
            if (e.index < 1 || e.index > p)
                throw ConfigError("coefficient index " + std::to_string(e.index) + " outside 1.." + std::to_string(p));
    for (const auto& b : z_blocks) {
        if (!(b.rho > -1.0 && b.rho < 1.0)) throw ConfigError("block correlation must lie in (-1, 1)");
        switch (b.type) {
            case BlockType::ar1:
            case BlockType::equicorr:
            case BlockType::cross:
                if (b.first < 1 || b.last < b.first) throw ConfigError("block range must satisfy 1 <= first <= last");
                if (b.type == BlockType::equicorr && b.rho < 0.0)
                    throw ConfigError("equicorrelated block needs rho >= 0");
                if (b.type == BlockType::cross) {
                    if (b.source < 1) throw ConfigError("cross block needs a source column");
                    if (b.source >= b.first && b.source <= b.last)
                        throw ConfigError("cross block source lies inside its own range");
                }
                break;
            case BlockType::confounder:
                if (b.source < 1 || b.source > p) throw ConfigError("confounder block column outside 1..p");
                if (b.component < 1 || b.component > g) throw ConfigError("confounder block component outside 1..g");
                break;
        }
    }
}

Vector ScenarioConfig::gamma_dense() const { return dense(gamma, p); }
Vector ScenarioConfig::pi_dense() const { return dense(pi, p); }

Dataset gen_dataset(const ScenarioConfig& cfg, RngStream& rng, Latents* latents) {
    cfg.validate();
    const Index n = cfg.n;
    const Index p = cfg.p;
    const Index g = cfg.Sigma_U.rows();
    const Index q = cfg.psi.size();

    Matrix E_U(n, g);
    for (Index k = 0; k < g; ++k)
        for (Index i = 0; i < n; ++i) E_U(i, k) = rng.normal();
    const Matrix L_U = cfg.Sigma_U.llt().matrixL();
    const Matrix U = E_U * L_U.transpose();
    Vector eps_D(n);
    for (Index i = 0; i < n; ++i) eps_D(i) = std::sqrt(cfg.sigma_D2) * rng.normal();
    Vector eps_Y(n);
    for (Index i = 0; i < n; ++i) eps_Y(i) = std::sqrt(cfg.sigma_Y2) * rng.normal();
    Matrix X(n, q);
    for (Index k = 0; k < q; ++k)
        for (Index i = 0; i < n; ++i) X(i, k) = rng.normal();
    Matrix Z(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) Z(i, j) = rng.normal();

    for (const auto& b : cfg.z_blocks) {
        if (b.type == BlockType::confounder) {
            const Index c = b.component - 1;
            const Index j = b.source - 1;
            const double scale = 1.0 / std::sqrt(cfg.Sigma_U(c, c));
            Z.col(j) = b.rho * scale * U.col(c) + std::sqrt(1.0 - b.rho * b.rho) * Z.col(j);
            continue;
        }
        if (b.first > p) continue;
        const Index a = b.first - 1;
        const Index len = std::min(b.last, p) - a;
        switch (b.type) {
            case BlockType::ar1: {
                Matrix S(len, len);
                for (Index r = 0; r < len; ++r)
                    for (Index c = 0; c < len; ++c) S(r, c) = std::pow(b.rho, static_cast<double>(std::abs(r - c)));
                const Matrix L = S.llt().matrixL();
                Z.middleCols(a, len) = (Z.middleCols(a, len) * L.transpose()).eval();
                break;
            }
            case BlockType::equicorr: {
                Vector w(n);
                for (Index i = 0; i < n; ++i) w(i) = rng.normal();
                const double sr = std::sqrt(b.rho);
                const double se = std::sqrt(1.0 - b.rho);
                for (Index c = a; c < a + len; ++c) Z.col(c) = sr * w + se * Z.col(c);
                break;
            }
            case BlockType::cross: {
                if (b.source > p) break;
                const Vector src = Z.col(b.source - 1);
                const double se = std::sqrt(1.0 - b.rho * b.rho);
                for (Index c = a; c < a + len; ++c) Z.col(c) = b.rho * src + se * Z.col(c);
                break;
            }
            case BlockType::confounder: break;
        }
    }

    Vector D = U * cfg.alpha_D + eps_D;
    for (const auto& e : cfg.gamma) D += e.value * Z.col(e.index - 1);
    if (q > 0) D += X * cfg.psi;
    Vector Y = cfg.beta_star * D + U * cfg.alpha_Y + eps_Y;
    for (const auto& e : cfg.pi) Y += e.value * Z.col(e.index - 1);
    if (q > 0) Y += X * cfg.phi;

    Dataset ds;
    ds.Z = std::move(Z);
    ds.D = std::move(D);
    ds.Y = std::move(Y);
    if (q > 0) ds.X = std::move(X);
    ds.pseudo_mask.assign(static_cast<std::size_t>(p), false);
    ds.z_names.reserve(static_cast<std::size_t>(p));
    for (Index j = 1; j <= p; ++j) ds.z_names.push_back("z" + std::to_string(j));
    for (Index k = 1; k <= q; ++k) ds.x_names.push_back("x" + std::to_string(k));
    if (latents != nullptr) {
        latents->U = U;
        latents->eps_D = std::move(eps_D);
        latents->eps_Y = std::move(eps_Y);
    }
    return ds;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {
        "main",     "higher_dim", "corr_with_valid_weak", "corr_with_valid_moderate", "corr_irrelevant",
        "multi_u",  "weak_iv",    "violate_i3",           "no_invalid_weak_comp"};
    return names;
}

namespace {

ScenarioConfig base_independent(const std::string& name, Index p) {
    ScenarioConfig cfg;
    cfg.name = name;
    cfg.n = 500;
    cfg.p = p;
    cfg.beta_star = 2.0;
    cfg.gamma = constant_entries(1, 9, 3.0);
    cfg.pi = {{1, 3.5}, {2, 3.5}};
    return cfg;
}

ScenarioConfig main_setting(const std::string& name, Index p) {
    ScenarioConfig cfg = base_independent(name, p);
    cfg.pi = {{1, -3.5}, {2, 3.5}};
    cfg.z_blocks.push_back({BlockType::ar1, 3, 9, 0, 1, 0.25});
    cfg.psi = Vector(2);
    cfg.psi << 1.5, 2.0;
    cfg.phi = Vector(2);
    cfg.phi << 1.2, 1.5;
    return cfg;
}

}  // namespace

ScenarioConfig preset(const std::string& name, Index p_override) {
    auto pick = [&](Index published) { return p_override > 0 ? p_override : published; };
    ScenarioConfig cfg;
    if (name == "main") {
        cfg = main_setting(name, pick(50000));
    } else if (name == "higher_dim") {
        cfg = main_setting(name, pick(100000));
    } else if (name == "corr_with_valid_weak" || name == "corr_with_valid_moderate") {
        cfg = base_independent(name, pick(50000));
        const double rho = name == "corr_with_valid_weak" ? 0.2 : 0.6;
        for (Index j = 3; j <= 7; ++j) {
            const Index first = 10 + 10 * (j - 3);
            cfg.z_blocks.push_back({BlockType::cross, first, first + 9, j, 1, rho});
        }
    } else if (name == "corr_irrelevant") {
        cfg = base_independent(name, pick(50000));
        for (Index start = 251; start <= cfg.p; start += 250) {
            cfg.z_blocks.push_back({BlockType::equicorr, start, start + 124, 0, 1, 0.2});
            cfg.z_blocks.push_back({BlockType::equicorr, start + 125, start + 249, 0, 1, 0.5});
        }
    } else if (name == "multi_u") {
        cfg = main_setting(name, pick(50000));
        cfg.alpha_D = Vector::Constant(2, 2.0);
        cfg.alpha_Y = Vector::Constant(2, -2.0);
        cfg.Sigma_U = Matrix::Identity(2, 2);
    } else if (name == "weak_iv") {
        cfg = base_independent(name, pick(50000));
        RngStream draws(0x5eed'0000'0000'0001ULL, stream_purpose::kPresetDraws);
        for (Index j = 10; j <= 59; ++j) {
            const double mag = 0.01 + 0.29 * draws.uniform();
            const double sign = draws.uniform() < 0.5 ? -1.0 : 1.0;
            cfg.gamma.push_back({j, sign * mag});
        }
    } else if (name == "violate_i3") {
        cfg = base_independent(name, pick(50000));
        cfg.pi = {{1, 3.5}};
        CovBlock b;
        b.type = BlockType::confounder;
        b.source = 2;
        b.component = 1;
        b.rho = 0.7;
        cfg.z_blocks.push_back(b);
    } else if (name == "no_invalid_weak_comp") {
        cfg = base_independent(name, pick(50000));
        cfg.gamma = constant_entries(1, 7, 2.5);
        cfg.pi.clear();
    } else {
        std::string list;
        for (const auto& s : preset_names()) list += (list.empty() ? "" : ", ") + s;
        throw ConfigError("unknown preset '" + name + "'; available: " + list);
    }
    // Published dimensions may be smaller than some coefficient indices only
    // when p is overridden below 59; drop such entries rather than failing.
    auto clip = [&](std::vector<SparseEntry>& v) {
        v.erase(std::remove_if(v.begin(), v.end(), [&](const SparseEntry& e) { return e.index > cfg.p; }), v.end());
    };
    clip(cfg.gamma);
    clip(cfg.pi);
    cfg.validate();
    return cfg;
}

double c_star(const ScenarioConfig& cfg) {
    const double cov = cfg.alpha_D.dot(cfg.Sigma_U * cfg.alpha_Y);
    const double var = cfg.alpha_D.dot(cfg.Sigma_U * cfg.alpha_D) + cfg.sigma_D2;
    if (!(var > 0.0)) throw DegeneracyError("exposure confounding variance is zero");
    return cov / var;
}

double c_tilde(const ScenarioConfig& cfg) {
    const double cov = cfg.alpha_D.dot(cfg.Sigma_U * cfg.alpha_Y);
    const double var = cfg.alpha_D.dot(cfg.Sigma_U * cfg.alpha_D) + cfg.sigma_D2;
    if (!(var > 0.0)) throw DegeneracyError("exposure confounding variance is zero");
    const double var_y = cfg.alpha_Y.dot(cfg.Sigma_U * cfg.alpha_Y);
    const double inner = std::max(0.0, var_y - cov * cov / var + cfg.sigma_Y2);
    return 8.0 * std::sqrt(inner) / std::sqrt(var);
}

const char* to_string(ColumnClass c) {
    switch (c) {
        case ColumnClass::valid: return "valid";
        case ColumnClass::invalid: return "invalid";
        case ColumnClass::irrelevant: return "irrelevant";
        case ColumnClass::pseudo: return "pseudo";
    }
    return "?";
}

std::vector<ColumnClass> classify_columns(const ScenarioConfig& cfg) {
    const Vector gamma = cfg.gamma_dense();
    const Vector pi = cfg.pi_dense();
    std::vector<bool> confounded(static_cast<std::size_t>(cfg.p), false);
    for (const auto& b : cfg.z_blocks)
        if (b.type == BlockType::confounder && b.rho != 0.0) confounded[static_cast<std::size_t>(b.source - 1)] = true;
    std::vector<ColumnClass> out(static_cast<std::size_t>(cfg.p), ColumnClass::irrelevant);
    for (Index j = 0; j < cfg.p; ++j) {
        const auto u = static_cast<std::size_t>(j);
        if (pi(j) != 0.0 || (gamma(j) != 0.0 && confounded[u])) {
            out[u] = ColumnClass::invalid;
        } else if (gamma(j) != 0.0) {
            out[u] = ColumnClass::valid;
        }
    }
    return out;
}

ColumnClass classify_column(const ScenarioConfig& cfg, Index column) {
    if (column >= cfg.p) return ColumnClass::pseudo;
    return classify_columns(cfg)[static_cast<std::size_t>(column)];
}

nlohmann::json to_json(const ScenarioConfig& cfg) {
    using nlohmann::json;
    auto entries = [](const std::vector<SparseEntry>& v) {
        json a = json::array();
        for (const auto& e : v) a.push_back(json::array({e.index, e.value}));
        return a;
    };
    auto vec = [](const Vector& v) {
        json a = json::array();
        for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
        return a;
    };
    json j;
    j["name"] = cfg.name;
    j["n"] = cfg.n;
    j["p"] = cfg.p;
    j["beta_star"] = cfg.beta_star;
    j["gamma"] = entries(cfg.gamma);
    j["pi"] = entries(cfg.pi);
    j["alpha_D"] = vec(cfg.alpha_D);
    j["alpha_Y"] = vec(cfg.alpha_Y);
    json su = json::array();
    for (Index r = 0; r < cfg.Sigma_U.rows(); ++r) su.push_back(vec(cfg.Sigma_U.row(r).transpose()));
    j["Sigma_U"] = su;
    j["sigma_D2"] = cfg.sigma_D2;
    j["sigma_Y2"] = cfg.sigma_Y2;
    json blocks = json::array();
    for (const auto& b : cfg.z_blocks) {
        json o;
        o["type"] = block_name(b.type);
        o["rho"] = b.rho;
        if (b.type == BlockType::confounder) {
            o["column"] = b.source;
            o["component"] = b.component;
        } else {
            o["first"] = b.first;
            o["last"] = b.last;
            if (b.type == BlockType::cross) o["source"] = b.source;
        }
        blocks.push_back(o);
    }
    j["z_blocks"] = blocks;
    j["psi"] = vec(cfg.psi);
    j["phi"] = vec(cfg.phi);
    j["seed"] = cfg.seed;
    return j;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    using nlohmann::json;
    if (!j.is_object()) throw ConfigError("scenario configuration must be a JSON object");
    static const std::vector<std::string> known = {"name", "n", "p", "beta_star", "gamma", "pi", "alpha_D",
                                                   "alpha_Y", "Sigma_U", "sigma_D2", "sigma_Y2", "z_blocks",
                                                   "psi", "phi", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown scenario field '" + it.key() + "'");
    ScenarioConfig cfg;
    try {
        auto entries = [](const json& a) {
            std::vector<SparseEntry> v;
            for (const auto& e : a) v.push_back({e.at(0).get<Index>(), e.at(1).get<double>()});
            return v;
        };
        auto vec = [](const json& a) {
            Vector v(static_cast<Index>(a.size()));
            for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a.at(i).get<double>();
            return v;
        };
        if (j.contains("name")) cfg.name = j["name"].get<std::string>();
        if (j.contains("n")) cfg.n = j["n"].get<Index>();
        if (j.contains("p")) cfg.p = j["p"].get<Index>();
        if (j.contains("beta_star")) cfg.beta_star = j["beta_star"].get<double>();
        if (j.contains("gamma")) cfg.gamma = entries(j["gamma"]);
        if (j.contains("pi")) cfg.pi = entries(j["pi"]);
        if (j.contains("alpha_D")) cfg.alpha_D = vec(j["alpha_D"]);
        if (j.contains("alpha_Y")) cfg.alpha_Y = vec(j["alpha_Y"]);
        if (j.contains("Sigma_U")) {
            const auto& su = j["Sigma_U"];
            const auto g = static_cast<Index>(su.size());
            cfg.Sigma_U.resize(g, g);
            for (Index r = 0; r < g; ++r) {
                if (static_cast<Index>(su.at(static_cast<std::size_t>(r)).size()) != g)
                    throw ConfigError("Sigma_U must be square");
                cfg.Sigma_U.row(r) = vec(su.at(static_cast<std::size_t>(r))).transpose();
            }
        }
        if (j.contains("sigma_D2")) cfg.sigma_D2 = j["sigma_D2"].get<double>();
        if (j.contains("sigma_Y2")) cfg.sigma_Y2 = j["sigma_Y2"].get<double>();
        if (j.contains("z_blocks")) {
            for (const auto& o : j["z_blocks"]) {
                CovBlock b;
                b.type = block_from_name(o.at("type").get<std::string>());
                b.rho = o.at("rho").get<double>();
                if (b.type == BlockType::confounder) {
                    b.source = o.at("column").get<Index>();
                    b.component = o.value("component", Index{1});
                } else {
                    b.first = o.at("first").get<Index>();
                    b.last = o.at("last").get<Index>();
                    if (b.type == BlockType::cross) b.source = o.at("source").get<Index>();
                }
                cfg.z_blocks.push_back(b);
            }
        }
        if (j.contains("psi")) cfg.psi = vec(j["psi"]);
        if (j.contains("phi")) cfg.phi = vec(j["phi"]);
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario configuration: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

void apply_override(nlohmann::json& cfg_json, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    cfg_json[key] = value;
}

}  // namespace ivpseudo
