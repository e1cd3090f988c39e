#pragma once

// End-to-end training and prediction: divide, adapt depth, fit local models,
// balance pseudo-labels, train the routing classifier. Also the JSON model
// file.

#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dal/assignment.hpp"
#include "dal/cart.hpp"
#include "dal/common.hpp"
#include "dal/dataset.hpp"
#include "dal/depth.hpp"
#include "dal/encoding.hpp"
#include "dal/learners.hpp"

namespace dal {

struct TrainConfig {
    Scheme scheme = Scheme::scaled_label;
    LocalLearnerSpec local;  // local.seed is ignored; per-division seeds derive
    // Empty = adapt the depth; 0 = one global model with no division step;
    // d >= 1 = forced depth (clamped to the fitted tree's depth).
    std::optional<std::size_t> forced_depth;
    CartParams cart{1, 10};
    RfParams rf{};
    std::size_t smote_k = 5;
    // Default: max(4, encoded width + 1) for linear locals, else 4.
    std::optional<std::size_t> merge_min_size;
    std::uint64_t seed = 1;
    unsigned jobs = 1;
};

struct DalModel {
    std::vector<OptionSpec> schema;
    std::string performance_name;
    Encoder encoder;
    CartTree tree;           // empty in global mode
    std::size_t depth_used = 0;  // 0 when degenerate or global
    bool degenerate = false;     // single division; classifier not consulted
    bool depth_clamped = false;  // forced depth exceeded the tree depth
    std::vector<Division> divisions;
    std::map<std::size_t, LocalModel> locals;
    RfClassifier classifier;
    TrainConfig cfg;
    std::uint64_t dataset_fingerprint = 0;
};

inline std::uint64_t fingerprint(const Dataset& d) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    auto mix_bytes = [&](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    auto mix_text = [&](const std::string& s) { mix_bytes(s.data(), s.size()); };
    auto mix_val = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        mix_bytes(&bits, sizeof bits);
    };
    mix_text(d.performance_name);
    for (const auto& s : d.schema) {
        mix_text(s.name);
        mix_text(option_kind_name(s.kind));
    }
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        for (double v : d.configs[r]) mix_val(v);
        mix_val(d.performance[r]);
    }
    return h;
}

inline std::size_t default_merge_min_size(LearnerKind kind, std::size_t encoded_width) {
    if (kind == LearnerKind::linear) return std::max<std::size_t>(4, encoded_width + 1);
    return 4;
}

inline DalModel train_dal(const Dataset& train, const TrainConfig& cfg) {
    if (train.n_rows() == 0) throw std::invalid_argument("train_dal: empty training set");

    DalModel m;
    m.schema = train.schema;
    m.performance_name = train.performance_name;
    m.cfg = cfg;
    m.dataset_fingerprint = fingerprint(train);
    m.encoder = fit_encoder(train, cfg.scheme);
    auto X = encode_all(m.encoder, train);
    const auto& y = train.performance;

    bool global = cfg.forced_depth && *cfg.forced_depth == 0;
    if (!global) {
        m.tree = fit_cart(X, y, cfg.cart);
        if (m.tree.depth() == 0) {
            global = true;  // nothing to divide on
        } else if (cfg.forced_depth) {
            m.depth_used = std::min(*cfg.forced_depth, m.tree.depth());
            m.depth_clamped = m.depth_used != *cfg.forced_depth;
        } else {
            m.depth_used = *adapt_depth(m.tree).d;
        }
    }

    if (global) {
        Division all;
        all.id = 0;
        all.node = 0;
        all.n = train.n_rows();
        all.sample_indices.resize(all.n);
        for (std::size_t i = 0; i < all.n; ++i) all.sample_indices[i] = i;
        double mean = 0.0, sse = 0.0;
        detail::node_stats(all.sample_indices, y, mean, sse);
        all.mean = mean;
        all.h = sse / static_cast<double>(all.n);
        all.z = -static_cast<double>(all.n);
        m.divisions = {all};
        m.degenerate = true;
        m.depth_used = 0;
        m.tree = CartTree{};
    } else {
        std::size_t merge_min = cfg.merge_min_size
                                    ? *cfg.merge_min_size
                                    : default_merge_min_size(cfg.local.kind,
                                                             m.encoder.output_width);
        m.divisions = merge_small_divisions(extract_divisions(m.tree, m.depth_used), m.tree,
                                            merge_min);
        if (m.divisions.size() == 1) m.degenerate = true;
    }

    // Local models, one per division, independent seeds per division id.
    std::vector<LocalModel> fitted(m.divisions.size());
    parallel_for(cfg.jobs, m.divisions.size(), [&](std::size_t i) {
        const Division& div = m.divisions[i];
        std::vector<std::vector<double>> Xd;
        std::vector<double> yd;
        Xd.reserve(div.n);
        yd.reserve(div.n);
        for (std::size_t r : div.sample_indices) {
            Xd.push_back(X[r]);
            yd.push_back(y[r]);
        }
        LocalLearnerSpec spec = cfg.local;
        spec.seed = derive_seed(cfg.seed, seed_stream::local_fit + div.id);
        fitted[i] = fit_local(spec, Xd, yd);
    });
    for (std::size_t i = 0; i < m.divisions.size(); ++i)
        m.locals.emplace(m.divisions[i].id, std::move(fitted[i]));

    if (!m.degenerate) {
        PseudoLabeledSet u;
        u.features = X;
        u.labels.resize(train.n_rows());
        for (const auto& div : m.divisions)
            for (std::size_t r : div.sample_indices) u.labels[r] = div.id;
        PseudoLabeledSet balanced =
            smote_oversample(u, cfg.smote_k, derive_seed(cfg.seed, seed_stream::smote));
        m.classifier =
            fit_rf(balanced, cfg.rf, derive_seed(cfg.seed, seed_stream::forest), cfg.jobs);
    }
    return m;
}

// Routes the configuration to a division and asks its local model. `unseen`
// counts one_hot values outside the training categories.
inline double predict_dal(const DalModel& m, const std::vector<double>& config,
                          std::size_t* unseen = nullptr) {
    if (config.size() != m.schema.size())
        throw std::invalid_argument("predict_dal: configuration width mismatch");
    auto x = encode(m.encoder, config, unseen);
    std::size_t id = m.degenerate ? m.divisions.front().id : classify(m.classifier, x);
    auto it = m.locals.find(id);
    if (it == m.locals.end())
        throw std::runtime_error("predict_dal: classifier produced an unknown division");
    return predict_local(it->second, x);
}

// ---- JSON model file ------------------------------------------------------

namespace detail {

using nlohmann::json;

inline json schema_to_json(const std::vector<OptionSpec>& schema) {
    json arr = json::array();
    for (const auto& s : schema) {
        json o{{"name", s.name},
               {"kind", option_kind_name(s.kind)},
               {"observed_values", s.observed_values}};
        if (s.kind == OptionKind::categorical) o["categories"] = s.categories;
        arr.push_back(std::move(o));
    }
    return arr;
}

inline std::vector<OptionSpec> schema_from_json(const json& arr) {
    std::vector<OptionSpec> schema;
    for (const auto& o : arr) {
        OptionSpec s;
        s.name = o.at("name").get<std::string>();
        auto kind = option_kind_from_name(o.at("kind").get<std::string>());
        if (!kind) throw DataError("model file: unknown option kind");
        s.kind = *kind;
        s.observed_values = o.at("observed_values").get<std::vector<double>>();
        if (o.contains("categories"))
            s.categories = o.at("categories").get<std::vector<std::string>>();
        schema.push_back(std::move(s));
    }
    return schema;
}

inline json encoder_to_json(const Encoder& e) {
    json o{{"scheme", scheme_name(e.scheme)},
           {"n_options", e.n_options},
           {"output_width", e.output_width}};
    if (e.scheme == Scheme::scaled_label) {
        o["v_min"] = e.v_min;
        o["v_max"] = e.v_max;
    }
    if (e.scheme == Scheme::one_hot) {
        o["categories"] = e.categories;
        o["offsets"] = e.offsets;
    }
    return o;
}

inline Encoder encoder_from_json(const json& o) {
    Encoder e;
    auto s = scheme_from_name(o.at("scheme").get<std::string>());
    if (!s) throw DataError("model file: unknown scheme");
    e.scheme = *s;
    e.n_options = o.at("n_options").get<std::size_t>();
    e.output_width = o.at("output_width").get<std::size_t>();
    if (e.scheme == Scheme::scaled_label) {
        e.v_min = o.at("v_min").get<std::vector<double>>();
        e.v_max = o.at("v_max").get<std::vector<double>>();
    }
    if (e.scheme == Scheme::one_hot) {
        e.categories = o.at("categories").get<std::vector<std::vector<double>>>();
        e.offsets = o.at("offsets").get<std::vector<std::size_t>>();
    }
    return e;
}

// Nested node layout; sample lists live with the divisions, not the tree.
inline json cart_node_to_json(const CartTree& t, int i) {
    const CartNode& n = t.nodes[static_cast<std::size_t>(i)];
    json o{{"mean", n.mean}, {"sse", n.sse}, {"depth", n.depth}};
    if (!n.is_leaf()) {
        o["feature"] = n.split_feature;
        o["threshold"] = n.threshold;
        o["left"] = cart_node_to_json(t, n.left);
        o["right"] = cart_node_to_json(t, n.right);
    }
    return o;
}

inline json cart_to_json(const CartTree& t) {
    if (t.nodes.empty()) return json(nullptr);
    return json{{"n_features", t.n_features}, {"root", cart_node_to_json(t, 0)}};
}

inline int cart_node_from_json(const json& o, CartTree& t, int parent, std::size_t depth) {
    int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    t.nodes[static_cast<std::size_t>(id)].parent = parent;
    t.nodes[static_cast<std::size_t>(id)].depth = depth;
    t.nodes[static_cast<std::size_t>(id)].mean = o.at("mean").get<double>();
    t.nodes[static_cast<std::size_t>(id)].sse = o.at("sse").get<double>();
    if (o.contains("feature")) {
        t.nodes[static_cast<std::size_t>(id)].split_feature = o.at("feature").get<int>();
        t.nodes[static_cast<std::size_t>(id)].threshold = o.at("threshold").get<double>();
        int l = cart_node_from_json(o.at("left"), t, id, depth + 1);
        t.nodes[static_cast<std::size_t>(id)].left = l;
        int r = cart_node_from_json(o.at("right"), t, id, depth + 1);
        t.nodes[static_cast<std::size_t>(id)].right = r;
    }
    return id;
}

inline CartTree cart_from_json(const json& o) {
    CartTree t;
    if (o.is_null()) return t;
    t.n_features = o.at("n_features").get<std::size_t>();
    cart_node_from_json(o.at("root"), t, -1, 0);
    return t;
}

inline json local_to_json(const LocalModel& m) {
    if (const auto* c = std::get_if<ConstantModel>(&m))
        return json{{"kind", "constant"}, {"value", c->value}};
    if (const auto* l = std::get_if<LinearModel>(&m))
        return json{{"kind", "linear"},
                    {"weights", l->weights},
                    {"intercept", l->intercept},
                    {"ridge_used", l->ridge_used}};
    if (const auto* t = std::get_if<CartModel>(&m))
        return json{{"kind", "cart"}, {"tree", cart_to_json(t->tree)}};
    const auto& net = std::get<NetModel>(m);
    return json{{"kind", "rnet"},     {"input_width", net.input_width},
                {"hidden_units", net.hidden_units}, {"w1", net.w1},
                {"b1", net.b1},       {"w2", net.w2},
                {"b2", net.b2},       {"l1_lambda", net.l1_lambda},
                {"y_min", net.y_min}, {"y_range", net.y_range}};
}

inline LocalModel local_from_json(const json& o) {
    const std::string kind = o.at("kind").get<std::string>();
    if (kind == "constant") return ConstantModel{o.at("value").get<double>()};
    if (kind == "linear") {
        LinearModel l;
        l.weights = o.at("weights").get<std::vector<double>>();
        l.intercept = o.at("intercept").get<double>();
        l.ridge_used = o.at("ridge_used").get<bool>();
        return l;
    }
    if (kind == "cart") return CartModel{cart_from_json(o.at("tree"))};
    if (kind == "rnet") {
        NetModel n;
        n.input_width = o.at("input_width").get<std::size_t>();
        n.hidden_units = o.at("hidden_units").get<std::size_t>();
        n.w1 = o.at("w1").get<std::vector<double>>();
        n.b1 = o.at("b1").get<std::vector<double>>();
        n.w2 = o.at("w2").get<std::vector<double>>();
        n.b2 = o.at("b2").get<double>();
        n.l1_lambda = o.at("l1_lambda").get<double>();
        n.y_min = o.at("y_min").get<double>();
        n.y_range = o.at("y_range").get<double>();
        return n;
    }
    throw DataError("model file: unknown local model kind '" + kind + "'");
}

inline json forest_to_json(const RfClassifier& f) {
    if (f.trees.empty()) return json(nullptr);
    json trees = json::array();
    for (const auto& t : f.trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes) {
            json o{{"label", n.label}};
            if (!n.is_leaf()) {
                o["feature"] = n.feature;
                o["threshold"] = n.threshold;
                o["left"] = n.left;
                o["right"] = n.right;
            }
            nodes.push_back(std::move(o));
        }
        trees.push_back(std::move(nodes));
    }
    return json{{"n_features", f.n_features},
                {"n_trees", f.params.n_trees},
                {"features_per_split", f.params.features_per_split},
                {"min_leaf", f.params.min_leaf},
                {"seed", f.seed},
                {"trees", trees}};
}

inline RfClassifier forest_from_json(const json& o) {
    RfClassifier f;
    if (o.is_null()) return f;
    f.n_features = o.at("n_features").get<std::size_t>();
    f.params.n_trees = o.at("n_trees").get<std::size_t>();
    f.params.features_per_split = o.at("features_per_split").get<std::size_t>();
    f.params.min_leaf = o.at("min_leaf").get<std::size_t>();
    f.seed = o.at("seed").get<std::uint64_t>();
    for (const auto& tn : o.at("trees")) {
        RfTree t;
        for (const auto& no : tn) {
            RfNode n;
            n.label = no.at("label").get<std::size_t>();
            if (no.contains("feature")) {
                n.feature = no.at("feature").get<int>();
                n.threshold = no.at("threshold").get<double>();
                n.left = no.at("left").get<int>();
                n.right = no.at("right").get<int>();
            }
            t.nodes.push_back(n);
        }
        f.trees.push_back(std::move(t));
    }
    return f;
}

inline json divisions_to_json(const std::vector<Division>& divs) {
    json arr = json::array();
    for (const auto& d : divs)
        arr.push_back(json{{"id", d.id},
                           {"node", d.node},
                           {"n", d.n},
                           {"mean", d.mean},
                           {"h", d.h},
                           {"z", d.z},
                           {"sample_indices", d.sample_indices}});
    return arr;
}

inline std::vector<Division> divisions_from_json(const json& arr) {
    std::vector<Division> divs;
    for (const auto& o : arr) {
        Division d;
        d.id = o.at("id").get<std::size_t>();
        d.node = o.at("node").get<std::size_t>();
        d.n = o.at("n").get<std::size_t>();
        d.mean = o.at("mean").get<double>();
        d.h = o.at("h").get<double>();
        d.z = o.at("z").get<double>();
        d.sample_indices = o.at("sample_indices").get<std::vector<std::size_t>>();
        divs.push_back(std::move(d));
    }
    return divs;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (std::size_t i = 0; i < 16; ++i) s[15 - i] = digits[(v >> (4 * i)) & 0xf];
    return s;
}

inline std::uint64_t parse_hex64(const std::string& s) {
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9')
            v |= static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            v |= static_cast<std::uint64_t>(c - 'a' + 10);
        else
            throw DataError("model file: bad fingerprint");
    }
    return v;
}

} // namespace detail

inline nlohmann::json model_to_json(const DalModel& m) {
    using nlohmann::json;
    json meta{{"format", "dal-model/1"},
              {"performance_name", m.performance_name},
              {"scheme", scheme_name(m.cfg.scheme)},
              {"learner", learner_name(m.cfg.local.kind)},
              {"depth_used", m.depth_used},
              {"degenerate", m.degenerate},
              {"depth_clamped", m.depth_clamped},
              {"seed", m.cfg.seed},
              {"smote_k", m.cfg.smote_k},
              {"cart", {{"min_leaf", m.cfg.cart.min_leaf}, {"max_depth", m.cfg.cart.max_depth}}},
              {"dataset_fingerprint", detail::hex64(m.dataset_fingerprint)}};
    if (m.cfg.forced_depth) meta["forced_depth"] = *m.cfg.forced_depth;
    json locals = json::array();
    for (const auto& [id, local] : m.locals) {
        json o = detail::local_to_json(local);
        o["division"] = id;
        locals.push_back(std::move(o));
    }
    return json{{"meta", meta},
                {"schema", detail::schema_to_json(m.schema)},
                {"encoder", detail::encoder_to_json(m.encoder)},
                {"tree", detail::cart_to_json(m.tree)},
                {"divisions", detail::divisions_to_json(m.divisions)},
                {"locals", locals},
                {"forest", detail::forest_to_json(m.classifier)}};
}

inline DalModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("meta") ||
        j.at("meta").value("format", "") != std::string("dal-model/1"))
        throw DataError("model file: not a dal-model/1 document");
    DalModel m;
    const auto& meta = j.at("meta");
    m.performance_name = meta.at("performance_name").get<std::string>();
    auto scheme = scheme_from_name(meta.at("scheme").get<std::string>());
    auto learner = learner_from_name(meta.at("learner").get<std::string>());
    if (!scheme || !learner) throw DataError("model file: unknown scheme or learner");
    m.cfg.scheme = *scheme;
    m.cfg.local.kind = *learner;
    m.depth_used = meta.at("depth_used").get<std::size_t>();
    m.degenerate = meta.at("degenerate").get<bool>();
    m.depth_clamped = meta.value("depth_clamped", false);
    m.cfg.seed = meta.at("seed").get<std::uint64_t>();
    m.cfg.smote_k = meta.at("smote_k").get<std::size_t>();
    m.cfg.cart.min_leaf = meta.at("cart").at("min_leaf").get<std::size_t>();
    m.cfg.cart.max_depth = meta.at("cart").at("max_depth").get<std::size_t>();
    if (meta.contains("forced_depth"))
        m.cfg.forced_depth = meta.at("forced_depth").get<std::size_t>();
    m.dataset_fingerprint = detail::parse_hex64(meta.at("dataset_fingerprint").get<std::string>());
    m.schema = detail::schema_from_json(j.at("schema"));
    m.encoder = detail::encoder_from_json(j.at("encoder"));
    m.tree = detail::cart_from_json(j.at("tree"));
    m.divisions = detail::divisions_from_json(j.at("divisions"));
    for (const auto& o : j.at("locals"))
        m.locals.emplace(o.at("division").get<std::size_t>(), detail::local_from_json(o));
    m.classifier = detail::forest_from_json(j.at("forest"));
    return m;
}

inline void save_model(const DalModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << model_to_json(m).dump(2) << '\n';
}

inline DalModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError(path + ": invalid JSON (" + std::string(e.what()) + ")");
    }
    try {
        return model_from_json(j);
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(path + ": malformed model (" + std::string(e.what()) + ")");
    }
}

} // namespace dal
