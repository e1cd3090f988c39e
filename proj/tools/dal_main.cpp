// Command-line surface: train, predict, evaluate, compare, inspect-divisions
// and encode subcommands over the divide-and-learn pipeline.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dal/dal.hpp"

namespace {

struct DepthFlag {
    std::optional<std::size_t> forced;  // empty = auto

    static DepthFlag parse(const std::string& s) {
        DepthFlag d;
        if (s == "auto") return d;
        std::size_t pos = 0;
        int v = -1;
        try {
            v = std::stoi(s, &pos);
        } catch (...) {
        }
        if (pos != s.size() || v < 0)
            throw CLI::ValidationError("--depth", "expects 'auto' or a non-negative integer");
        d.forced = static_cast<std::size_t>(v);
        return d;
    }
};

struct CommonTrainFlags {
    std::string scheme = "scaled";
    std::string learner = "rnet";
    std::string depth = "auto";
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::size_t cart_min_leaf = 1;
    std::size_t cart_max_depth = 10;
    long long merge_min_size = -1;  // -1 = learner default
    std::size_t rf_trees = 100;
    std::size_t rf_features = 0;  // 0 = ceil(sqrt(width))
    std::size_t rf_min_leaf = 1;
    std::size_t smote_k = 5;
    std::size_t epochs = 300;
    double learning_rate = 0.01;
    long long hidden_units = -1;  // -1 = grid
    double l1_lambda = -1.0;      // <0 = grid

    void attach(CLI::App* cmd) {
        cmd->add_option("--scheme", scheme, "Encoding: label, scaled or onehot")
            ->check(CLI::IsMember({"label", "scaled", "onehot"}));
        cmd->add_option("--learner", learner, "Local model: linear, cart or rnet")
            ->check(CLI::IsMember({"linear", "cart", "rnet"}));
        cmd->add_option("--depth", depth,
                        "Division depth: auto, 0 for one global model, or a fixed d >= 1");
        cmd->add_option("--seed", seed, "Master RNG seed");
        cmd->add_option("--jobs", jobs, "Worker thread bound (same results for any value)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--cart-min-leaf", cart_min_leaf, "Divider CART minimum leaf size");
        cmd->add_option("--cart-max-depth", cart_max_depth, "Divider CART depth cap");
        cmd->add_option("--merge-min-size", merge_min_size,
                        "Division merge threshold (default: learner-specific)");
        cmd->add_option("--rf-trees", rf_trees, "Classifier tree count");
        cmd->add_option("--rf-features", rf_features,
                        "Features per classifier split (0 = ceil(sqrt(width)))");
        cmd->add_option("--rf-min-leaf", rf_min_leaf, "Classifier minimum leaf size");
        cmd->add_option("--smote-k", smote_k, "SMOTE neighbor count");
        cmd->add_option("--epochs", epochs, "rnet training epochs");
        cmd->add_option("--learning-rate", learning_rate, "rnet learning rate");
        cmd->add_option("--hidden", hidden_units, "rnet hidden units (default: search 8 and 16)");
        cmd->add_option("--l1-lambda", l1_lambda,
                        "rnet L1 strength (default: search 0, 0.01 and 0.1)");
    }

    dal::TrainConfig to_config() const {
        dal::TrainConfig cfg;
        cfg.scheme = *dal::scheme_from_name(scheme);
        cfg.local.kind = *dal::learner_from_name(learner);
        cfg.forced_depth = DepthFlag::parse(depth).forced;
        cfg.cart = {cart_min_leaf, cart_max_depth};
        cfg.rf = {rf_trees, rf_features, rf_min_leaf};
        cfg.smote_k = smote_k;
        if (merge_min_size >= 0)
            cfg.merge_min_size = static_cast<std::size_t>(merge_min_size);
        cfg.seed = seed;
        cfg.jobs = jobs;
        cfg.local.cart = {cart_min_leaf, cart_max_depth};
        cfg.local.epochs = epochs;
        cfg.local.learning_rate = learning_rate;
        if (hidden_units > 0) cfg.local.hidden_units = static_cast<std::size_t>(hidden_units);
        if (l1_lambda >= 0.0) cfg.local.l1_lambda = l1_lambda;
        return cfg;
    }
};

void write_text(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw dal::DataError(out_path + ": cannot open for writing");
    out << text;
}

// "name:key=value,key=value" with keys learner, scheme and depth.
dal::Recipe parse_recipe(const std::string& text, const dal::TrainConfig& base) {
    auto colon = text.find(':');
    dal::Recipe recipe;
    recipe.name = colon == std::string::npos ? text : text.substr(0, colon);
    recipe.cfg = base;
    if (recipe.name.empty())
        throw CLI::ValidationError("--recipe", "recipe name must be non-empty");
    if (colon == std::string::npos) return recipe;

    std::string rest = text.substr(colon + 1);
    std::stringstream ss(rest);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--recipe", "expected key=value, got '" + item + "'");
        std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "learner") {
            auto k = dal::learner_from_name(value);
            if (!k) throw CLI::ValidationError("--recipe", "unknown learner '" + value + "'");
            recipe.cfg.local.kind = *k;
        } else if (key == "scheme") {
            auto s = dal::scheme_from_name(value);
            if (!s) throw CLI::ValidationError("--recipe", "unknown scheme '" + value + "'");
            recipe.cfg.scheme = *s;
        } else if (key == "depth") {
            recipe.cfg.forced_depth = DepthFlag::parse(value).forced;
        } else {
            throw CLI::ValidationError("--recipe", "unknown key '" + key +
                                                       "' (use learner, scheme or depth)");
        }
    }
    return recipe;
}

// Reads a configurations CSV against a known schema. Columns must match the
// schema's option names in order; a trailing performance column is ignored.
// Unknown categorical levels map to an out-of-vocabulary code and are
// counted.
struct QueryFile {
    std::vector<std::vector<std::string>> raw_rows;  // option cells as given
    std::vector<std::vector<double>> configs;
    std::size_t unknown_levels = 0;
};

QueryFile load_queries(const std::string& path, const std::vector<dal::OptionSpec>& schema) {
    std::ifstream in(path);
    if (!in) throw dal::DataError(path + ": cannot open file");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (dal::detail::trim(line).empty()) continue;
        lines.push_back(line);
    }
    if (lines.empty()) throw dal::DataError(path + ": empty file");
    auto header = dal::detail::split_csv_line(lines[0]);
    bool has_perf_col = header.size() == schema.size() + 1;
    if (header.size() != schema.size() && !has_perf_col)
        throw dal::DataError(path + ": expected " + std::to_string(schema.size()) +
                             " option columns, found " + std::to_string(header.size()));
    for (std::size_t c = 0; c < schema.size(); ++c)
        if (header[c] != schema[c].name)
            throw dal::DataError(path + ": column " + std::to_string(c + 1) + " is '" +
                                 header[c] + "', model expects '" + schema[c].name + "'");

    QueryFile q;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto row = dal::detail::split_csv_line(lines[r]);
        if (row.size() != header.size())
            throw dal::DataError(path + ": row " + std::to_string(r + 1) + " has " +
                                 std::to_string(row.size()) + " cells, expected " +
                                 std::to_string(header.size()));
        std::vector<double> cfg(schema.size());
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (row[c].empty())
                throw dal::DataError(path + ": empty cell at row " + std::to_string(r + 1) +
                                     ", column " + std::to_string(c + 1));
            if (schema[c].kind == dal::OptionKind::categorical) {
                const auto& cats = schema[c].categories;
                auto it = std::lower_bound(cats.begin(), cats.end(), row[c]);
                if (it != cats.end() && *it == row[c]) {
                    cfg[c] = static_cast<double>(it - cats.begin());
                } else {
                    cfg[c] = static_cast<double>(cats.size());  // out of vocabulary
                    ++q.unknown_levels;
                }
            } else {
                auto v = dal::detail::parse_double(row[c]);
                if (!v)
                    throw dal::DataError(path + ": non-numeric value '" + row[c] +
                                         "' at row " + std::to_string(r + 1) + ", column " +
                                         std::to_string(c + 1) + " ('" + schema[c].name + "')");
                cfg[c] = *v;
            }
        }
        row.resize(schema.size());
        q.raw_rows.push_back(std::move(row));
        q.configs.push_back(std::move(cfg));
    }
    return q;
}

int run_train(const std::string& data_path, const CommonTrainFlags& flags,
              const std::string& out_path) {
    dal::Dataset data = dal::load_csv(data_path);
    dal::DalModel model = dal::train_dal(data, flags.to_config());
    dal::save_model(model, out_path);
    std::cerr << "trained on " << data.n_rows() << " rows, " << model.divisions.size()
              << " division(s), depth " << model.depth_used
              << (model.degenerate ? " (degenerate)" : "") << "\n";
    return 0;
}

int run_predict(const std::string& model_path, const std::string& in_path,
                const std::string& out_path) {
    dal::DalModel model = dal::load_model(model_path);
    QueryFile q = load_queries(in_path, model.schema);
    std::string text;
    for (const auto& s : model.schema) text += s.name + ",";
    text += model.performance_name + "\n";
    std::size_t unseen = 0;
    for (std::size_t i = 0; i < q.configs.size(); ++i) {
        double pred = dal::predict_dal(model, q.configs[i], &unseen);
        for (const auto& cell : q.raw_rows[i]) text += cell + ",";
        text += dal::detail::format_double(pred) + "\n";
    }
    write_text(out_path, text);
    if (q.unknown_levels > 0)
        std::cerr << q.unknown_levels << " categorical value(s) unseen in training\n";
    if (unseen > 0)
        std::cerr << unseen << " one-hot value(s) outside the trained categories\n";
    return 0;
}

int run_evaluate(const std::string& data_path, const CommonTrainFlags& flags,
                 std::size_t train_size, std::size_t runs, const std::string& out_path,
                 const std::string& format) {
    dal::Dataset data = dal::load_csv(data_path);
    if (train_size < 1 || train_size >= data.n_rows())
        throw dal::DataError("--train-size must be in [1, " + std::to_string(data.n_rows()) +
                             ") for " + data_path);
    dal::Recipe recipe{"default", flags.to_config()};
    dal::EvalReport report =
        dal::evaluate(recipe, data, train_size, runs, flags.seed, flags.jobs);
    if (format == "table")
        write_text(out_path, dal::eval_report_table(report));
    else
        write_text(out_path, dal::eval_report_to_json(report).dump(2) + "\n");
    double total_ms = 0.0;
    for (const auto& r : report.results) total_ms += r.wall_ms;
    std::cerr << runs << " run(s), " << static_cast<long long>(total_ms) << " ms total\n";
    return 0;
}

int run_compare(const std::string& data_path, const CommonTrainFlags& flags,
                const std::vector<std::string>& recipe_texts, std::size_t train_size,
                std::size_t runs, std::size_t boot_iters, const std::string& out_path,
                const std::string& format) {
    if (recipe_texts.size() < 2)
        throw CLI::ValidationError("--recipe", "need at least two recipes to compare");
    dal::Dataset data = dal::load_csv(data_path);
    if (train_size < 1 || train_size >= data.n_rows())
        throw dal::DataError("--train-size must be in [1, " + std::to_string(data.n_rows()) +
                             ") for " + data_path);
    dal::TrainConfig base = flags.to_config();
    std::vector<dal::Recipe> recipes;
    for (const auto& text : recipe_texts) recipes.push_back(parse_recipe(text, base));
    for (std::size_t i = 0; i < recipes.size(); ++i)
        for (std::size_t j = i + 1; j < recipes.size(); ++j)
            if (recipes[i].name == recipes[j].name)
                throw CLI::ValidationError("--recipe",
                                           "duplicate recipe name '" + recipes[i].name + "'");

    std::map<std::string, std::vector<double>> mres;
    for (const auto& recipe : recipes) {
        dal::EvalReport report =
            dal::evaluate(recipe, data, train_size, runs, flags.seed, flags.jobs);
        auto& list = mres[recipe.name];
        for (const auto& r : report.results)
            if (r.mre_pct) list.push_back(*r.mre_pct);
        if (list.size() < 2)
            throw dal::DataError("recipe '" + recipe.name +
                                 "': fewer than 2 defined MRE values; cannot rank");
    }
    dal::SkRanking ranking =
        dal::scott_knott(mres, 0.99, 0.6, boot_iters, dal::derive_seed(flags.seed, 0x5c077));
    if (format == "table")
        write_text(out_path, dal::sk_table(ranking));
    else
        write_text(out_path, dal::sk_to_json(ranking).dump(2) + "\n");
    return 0;
}

int run_inspect(const std::string& data_path, const CommonTrainFlags& flags,
                const std::string& out_path) {
    dal::Dataset data = dal::load_csv(data_path);
    dal::Encoder encoder = dal::fit_encoder(data, *dal::scheme_from_name(flags.scheme));
    dal::CartTree tree =
        dal::fit_cart(data, encoder, {flags.cart_min_leaf, flags.cart_max_depth});
    dal::DepthChoice choice = dal::adapt_depth(tree);

    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& c : choice.candidates) {
        nlohmann::json divs = nlohmann::json::array();
        for (const auto& d : c.divisions)
            divs.push_back(nlohmann::json{
                {"id", d.id}, {"n", d.n}, {"mean", d.mean}, {"h", d.h}, {"z", d.z}});
        candidates.push_back(
            nlohmann::json{{"d", c.d}, {"mu_hv", c.mu_hv}, {"divisions", divs}});
    }
    nlohmann::json out{{"format", "dal-divisions/1"},
                       {"tree_depth", tree.depth()},
                       {"candidates", candidates}};
    if (choice.d) {
        out["chosen_d"] = *choice.d;
        out["reference"] = {{"h_r", choice.ref.h_r}, {"z_r", choice.ref.z_r}};
    } else {
        out["chosen_d"] = nullptr;
    }
    write_text(out_path, out.dump(2) + "\n");
    return 0;
}

int run_encode(const std::string& data_path, const std::string& scheme,
               const std::string& out_path) {
    dal::Dataset data = dal::load_csv(data_path);
    dal::Encoder encoder = dal::fit_encoder(data, *dal::scheme_from_name(scheme));
    auto names = dal::encoded_feature_names(encoder, data.schema);
    std::string text;
    for (std::size_t i = 0; i < names.size(); ++i)
        text += names[i] + (i + 1 < names.size() ? "," : "");
    text += "\n";
    for (const auto& cfg : data.configs) {
        auto x = dal::encode(encoder, cfg);
        for (std::size_t i = 0; i < x.size(); ++i)
            text += dal::detail::format_double(x[i]) + (i + 1 < x.size() ? "," : "");
        text += "\n";
    }
    write_text(out_path, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Divide-and-learn performance models for configurable software"};
    app.require_subcommand(1);

    std::string data_path, model_path, in_path, out_path, format = "json";
    std::size_t runs = 30, train_size = 0, boot_iters = 1000;
    std::vector<std::string> recipe_texts;
    CommonTrainFlags train_flags, eval_flags, compare_flags, inspect_flags;
    std::string encode_scheme = "scaled";

    CLI::App* train = app.add_subcommand("train", "Fit a model and write it to a JSON file");
    train->add_option("--data", data_path, "Training CSV")->required();
    train->add_option("--out", out_path, "Model output path")->required();
    train_flags.attach(train);

    CLI::App* predict =
        app.add_subcommand("predict", "Predict performance for a configurations CSV");
    predict->add_option("--model", model_path, "Model JSON from train")->required();
    predict->add_option("--in", in_path, "Configurations CSV")->required();
    predict->add_option("--out", out_path, "Predictions CSV (default stdout)");

    CLI::App* evaluate =
        app.add_subcommand("evaluate", "Bootstrap train/test evaluation of one recipe");
    evaluate->add_option("--data", data_path, "Dataset CSV")->required();
    evaluate->add_option("--train-size", train_size, "Training rows per run")->required();
    evaluate->add_option("--runs", runs, "Bootstrap runs")->check(CLI::PositiveNumber);
    evaluate->add_option("--out", out_path, "Report path (default stdout)");
    evaluate->add_option("--format", format, "json or table")
        ->check(CLI::IsMember({"json", "table"}));
    eval_flags.attach(evaluate);

    CLI::App* compare = app.add_subcommand(
        "compare", "Scott-Knott ranking of two or more recipes on shared splits");
    compare->add_option("--data", data_path, "Dataset CSV")->required();
    compare->add_option("--train-size", train_size, "Training rows per run")->required();
    compare
        ->add_option("--recipe", recipe_texts,
                     "name:key=val,... with keys learner, scheme, depth; give at least two")
        ->required();
    compare->add_option("--runs", runs, "Bootstrap runs per recipe")
        ->check(CLI::PositiveNumber);
    compare->add_option("--boot-iters", boot_iters, "Bootstrap iterations for the split test")
        ->check(CLI::PositiveNumber);
    compare->add_option("--out", out_path, "Report path (default stdout)");
    compare->add_option("--format", format, "json or table")
        ->check(CLI::IsMember({"json", "table"}));
    compare_flags.attach(compare);

    CLI::App* inspect = app.add_subcommand(
        "inspect-divisions", "Dump per-depth divisions, objectives and mu-HV as JSON");
    inspect->add_option("--data", data_path, "Dataset CSV")->required();
    inspect->add_option("--out", out_path, "Output path (default stdout)");
    inspect_flags.attach(inspect);

    CLI::App* encode = app.add_subcommand("encode", "Write the encoded feature matrix as CSV");
    encode->add_option("--data", data_path, "Dataset CSV")->required();
    encode->add_option("--scheme", encode_scheme, "Encoding: label, scaled or onehot")
        ->check(CLI::IsMember({"label", "scaled", "onehot"}));
    encode->add_option("--out", out_path, "Output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train->parsed()) return run_train(data_path, train_flags, out_path);
        if (predict->parsed()) return run_predict(model_path, in_path, out_path);
        if (evaluate->parsed())
            return run_evaluate(data_path, eval_flags, train_size, runs, out_path, format);
        if (compare->parsed())
            return run_compare(data_path, compare_flags, recipe_texts, train_size, runs,
                               boot_iters, out_path, format);
        if (inspect->parsed()) return run_inspect(data_path, inspect_flags, out_path);
        if (encode->parsed()) return run_encode(data_path, encode_scheme, out_path);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const dal::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
