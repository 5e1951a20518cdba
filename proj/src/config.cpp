#include "moew/config.hpp"

#include "moew/errors.hpp"
#include "moew/io.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace moew {

namespace {

using json = nlohmann::json;

/// A JSON object being consumed; remembers which keys were read so leftovers can be rejected.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    bool has(const std::string& k) const { return j_.contains(k); }

    const json& raw(const std::string& k) {
        if (!j_.contains(k)) throw ConfigError(key(k), "required key missing");
        used_.insert(k);
        return j_.at(k);
    }

    Node child(const std::string& k) { return Node(raw(k), key(k)); }

    double number(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_number()) throw ConfigError(key(k), "expected a number");
        return v.get<double>();
    }
    double number(const std::string& k, double fallback) { return has(k) ? number(k) : fallback; }

    long integer(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_number_integer()) throw ConfigError(key(k), "expected an integer");
        return v.get<long>();
    }
    long integer(const std::string& k, long fallback) { return has(k) ? integer(k) : fallback; }

    std::uint64_t seed(const std::string& k, std::uint64_t fallback) {
        if (!has(k)) return fallback;
        const json& v = raw(k);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw ConfigError(key(k), "expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& k, bool fallback) {
        if (!has(k)) return fallback;
        const json& v = raw(k);
        if (!v.is_boolean()) throw ConfigError(key(k), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_string()) throw ConfigError(key(k), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& k, const std::string& fallback) { return has(k) ? string(k) : fallback; }

    std::vector<int> int_list(const std::string& k, std::vector<int> fallback) {
        if (!has(k)) return fallback;
        const json& v = raw(k);
        if (!v.is_array()) throw ConfigError(key(k), "expected a list of integers");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) throw ConfigError(key(k), "expected a list of integers");
            out.push_back(e.get<int>());
        }
        return out;
    }

    std::vector<double> number_list(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_array()) throw ConfigError(key(k), "expected a list of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(key(k), "expected a list of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::string> string_list(const std::string& k) {
        const json& v = raw(k);
        if (!v.is_array()) throw ConfigError(key(k), "expected a list of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) throw ConfigError(key(k), "expected a list of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    /// Rejects keys that were never read.
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ConfigError(key(k), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <typename T, typename Parse>
T parse_enum(Node& n, const std::string& k, T fallback, Parse&& parse) {
    if (!n.has(k)) return fallback;
    const std::string s = n.string(k);
    try {
        return parse(s);
    } catch (const ContractError& e) {
        throw ConfigError(n.key(k), e.what());
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

TrainConfig parse_train(Node n, TrainConfig t) {
    t.steps = n.integer("steps", t.steps);
    t.learning_rate = n.number("learning_rate", t.learning_rate);
    t.adam_beta1 = n.number("beta1", t.adam_beta1);
    t.adam_beta2 = n.number("beta2", t.adam_beta2);
    t.adam_eps = n.number("eps", t.adam_eps);
    t.batch_size = n.integer("batch_size", t.batch_size);
    n.finish();
    return t;
}

BetaParams parse_beta(Node& n, const std::string& k, const json& v) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError(n.key(k), "expected [a, b]");
    return {v[0].get<double>(), v[1].get<double>()};
}

std::array<BetaParams, 2> parse_beta_pair(Node& n, const std::string& k, std::array<BetaParams, 2> fallback) {
    if (!n.has(k)) return fallback;
    const json& v = n.raw(k);
    if (!v.is_array() || v.size() != 2) throw ConfigError(n.key(k), "expected [[a, b], [a, b]]");
    return {parse_beta(n, k, v[0]), parse_beta(n, k, v[1])};
}

DataConfig parse_data(Node n, const std::filesystem::path& base) {
    DataConfig d;
    if (n.has("toy") == n.has("csv")) throw ConfigError(n.key("toy"), "give exactly one of toy or csv");
    if (n.has("toy")) {
        Node t = n.child("toy");
        ToySpec s;
        s.n_train = t.integer("n_train", s.n_train);
        s.n_val = t.integer("n_val", s.n_val);
        s.n_test = t.integer("n_test", s.n_test);
        s.beta_train = parse_beta_pair(t, "beta_train", s.beta_train);
        s.beta_test = parse_beta_pair(t, "beta_test", s.beta_test);
        s.label_noise = t.number("label_noise", s.label_noise);
        t.finish();
        d.source = s;
    } else {
        Node c = n.child("csv");
        CsvSource s;
        if (c.has("file")) s.file = resolve(base, c.string("file"));
        if (c.has("train")) s.train = resolve(base, c.string("train"));
        if (c.has("validation")) s.validation = resolve(base, c.string("validation"));
        if (c.has("test")) s.test = resolve(base, c.string("test"));
        for (const auto& f : c.string_list("features")) s.schema.columns.emplace_back(f, ColumnRole::feature);
        s.schema.columns.emplace_back(c.string("label"), ColumnRole::label);
        if (c.has("group")) s.schema.columns.emplace_back(c.string("group"), ColumnRole::group);
        if (c.has("aux_score")) s.schema.columns.emplace_back(c.string("aux_score"), ColumnRole::aux_score);
        if (c.has("split")) s.schema.columns.emplace_back(c.string("split"), ColumnRole::split);
        else if (!s.file.empty()) s.schema.columns.emplace_back("split", ColumnRole::split);
        s.schema.label_kind = parse_enum(c, "label_kind", LabelKind::regression, parse_label_kind);
        if (c.has("classes")) s.schema.classes = c.string_list("classes");
        c.finish();
        d.source = s;
    }
    d.label_transform = parse_enum(n, "label_transform", d.label_transform, parse_label_transform);
    d.standardize = n.boolean("standardize", d.standardize);
    d.train_subsample = n.integer("train_subsample", d.train_subsample);
    n.finish();
    return d;
}

MetricSpec parse_metric(Node n) {
    MetricSpec m;
    m.name = n.string("name");
    if (n.has("params")) {
        Node p = n.child("params");
        for (const auto& [k, v] : n.raw("params").items()) m.params[k] = p.number(k);
        p.finish();
    }
    n.finish();
    return m;
}

GeneratorKind parse_generator(const std::string& s) {
    if (s == "bucb") return GeneratorKind::bucb;
    if (s == "random") return GeneratorKind::random;
    if (s == "grid") return GeneratorKind::grid;
    throw ContractError("unknown generator '" + s + "'");
}

BaselineMethod parse_baseline_kind(const std::string& s) {
    for (auto k : {BaselineMethod::uniform, BaselineMethod::random, BaselineMethod::importance, BaselineMethod::user,
                   BaselineMethod::density_ratio})
        if (s == to_string(k)) return k;
    throw ContractError("unknown baseline kind '" + s + "'");
}

} // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    Node root(j, "");
    const long version = root.integer("version");
    if (version != kConfigVersion)
        throw ConfigError("version", "unsupported version " + std::to_string(version));

    ExperimentConfig cfg;
    cfg.seed = root.seed("seed", cfg.seed);
    cfg.repeats = static_cast<int>(root.integer("repeats", cfg.repeats));
    cfg.jobs = static_cast<int>(root.integer("jobs", cfg.jobs));
    cfg.data = parse_data(root.child("data"), base_dir);
    cfg.metric = parse_metric(root.child("metric"));

    if (root.has("model")) {
        Node m = root.child("model");
        cfg.model_hidden = m.int_list("hidden", cfg.model_hidden);
        if (m.has("train")) cfg.model_train = parse_train(m.child("train"), cfg.model_train);
        m.finish();
    }
    if (root.has("embedding")) {
        Node e = root.child("embedding");
        cfg.embedding.kind = parse_enum(e, "kind", cfg.embedding.kind, parse_embedder_kind);
        auto& ae = cfg.embedding.autoencoder;
        ae.dim = static_cast<int>(e.integer("dim", ae.dim));
        ae.hidden = e.int_list("hidden", ae.hidden);
        ae.lambda = e.number("lambda", ae.lambda);
        if (e.has("train")) ae.train = parse_train(e.child("train"), ae.train);
        e.finish();
    }
    if (root.has("importance")) {
        Node i = root.child("importance");
        cfg.importance = parse_enum(i, "kind", cfg.importance, parse_importance_kind);
        if (i.has("ratios")) cfg.importance_ratios = i.number_list("ratios");
        i.finish();
    }
    if (root.has("search")) {
        Node s = root.child("search");
        cfg.generator = parse_enum(s, "generator", cfg.generator, parse_generator);
        cfg.batches = static_cast<int>(s.integer("batches", cfg.batches));
        cfg.bucb.batch_size = static_cast<int>(s.integer("batch_size", cfg.bucb.batch_size));
        cfg.bucb.p = s.number("p", cfg.bucb.p);
        cfg.bucb.q = s.number("q", cfg.bucb.q);
        cfg.bucb.radius = s.number("radius", cfg.bucb.radius);
        cfg.bucb.acquisition_samples = static_cast<int>(s.integer("acquisition_samples", cfg.bucb.acquisition_samples));
        cfg.grid_epsilon = s.number("epsilon", cfg.grid_epsilon);
        cfg.noise_seeds = static_cast<int>(s.integer("noise_seeds", cfg.noise_seeds));
        s.finish();
    }
    cfg.run_moew = root.boolean("moew", cfg.run_moew);
    if (root.has("baselines")) {
        const json& list = root.raw("baselines");
        if (!list.is_array()) throw ConfigError("baselines", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i) {
            Node b(list[i], "baselines[" + std::to_string(i) + "]");
            BaselineSpec spec;
            spec.kind = parse_enum(b, "kind", spec.kind, parse_baseline_kind);
            if (!b.has("kind")) b.string("kind");
            spec.budget = b.integer("budget", spec.budget);
            if (b.has("file")) spec.user_file = resolve(base_dir, b.string("file"));
            b.finish();
            cfg.baselines.push_back(spec);
        }
    }
    root.finish();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

} // namespace moew
