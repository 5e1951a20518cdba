#include "moew/data.hpp"

#include "moew/errors.hpp"
#include "moew/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace moew {

const char* to_string(SplitRole role) {
    switch (role) {
    case SplitRole::train: return "train";
    case SplitRole::validation: return "validation";
    case SplitRole::test: return "test";
    }
    return "?";
}

const char* to_string(LabelKind kind) {
    switch (kind) {
    case LabelKind::regression: return "regression";
    case LabelKind::binary: return "binary";
    case LabelKind::multiclass: return "multiclass";
    }
    return "?";
}

CategoryIndex::CategoryIndex(std::vector<std::string> predeclared) {
    for (auto& name : predeclared) lookup_or_insert(name);
    frozen_ = true;
}

std::optional<int> CategoryIndex::lookup_or_insert(const std::string& token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    if (frozen_) return std::nullopt;
    int id = static_cast<int>(names_.size());
    names_.push_back(token);
    index_.emplace(token, id);
    return id;
}

std::optional<int> CategoryIndex::lookup(const std::string& token) const {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    return std::nullopt;
}

void Dataset::validate() const {
    const auto n = features.rows();
    if (n < 1) throw ContractError("dataset must contain at least one row");
    if (labels.size() != n) throw ContractError("label count does not match feature rows");
    if (!features.allFinite()) throw ContractError("feature matrix contains non-finite entries");
    if (!labels.allFinite()) throw ContractError("labels contain non-finite entries");
    if (label_kind != LabelKind::regression) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double y = labels[i];
            if (y != std::floor(y) || y < 0 || y >= num_classes)
                throw ContractError("class index out of range at row " + std::to_string(i));
        }
    }
    if (groups && static_cast<Eigen::Index>(groups->size()) != n)
        throw ContractError("group vector length does not match rows");
    if (aux_scores) {
        if (aux_scores->size() != n) throw ContractError("aux score length does not match rows");
        for (double a : *aux_scores)
            if (!(a >= 0.0 && a <= 1.0)) throw ContractError("aux scores must lie in [0,1]");
    }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& idx) const {
    Dataset out;
    const auto m = static_cast<Eigen::Index>(idx.size());
    out.features.resize(m, features.cols());
    out.labels.resize(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        out.features.row(r) = features.row(idx[r]);
        out.labels[r] = labels[idx[r]];
    }
    out.label_kind = label_kind;
    out.num_classes = num_classes;
    out.class_names = class_names;
    out.group_names = group_names;
    out.role = role;
    if (groups) {
        std::vector<int> g(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) g[r] = (*groups)[idx[r]];
        out.groups = std::move(g);
    }
    if (aux_scores) {
        Vector a(m);
        for (Eigen::Index r = 0; r < m; ++r) a[r] = (*aux_scores)[idx[r]];
        out.aux_scores = std::move(a);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"') {
            if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else {
                quoted = !quoted;
            }
        } else if (c == ',' && !quoted) {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r' || quoted) {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    for (auto& s : out) {
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    }
    return out;
}

std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

RawTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    RawTable t;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("'" + path.string() + "' is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    t.header = split_line(line);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw ParseError(row, "*", "expected " + std::to_string(t.header.size()) +
                                           " cells, found " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

struct ColumnMap {
    std::vector<std::size_t> features;
    std::vector<std::string> feature_names;
    std::optional<std::size_t> label, group, aux, split;
    std::string label_name, group_name, aux_name, split_name;
};

ColumnMap map_columns(const RawTable& t, const CsvSchema& schema, const std::string& file) {
    ColumnMap m;
    for (const auto& [name, role] : schema.columns) {
        auto it = std::find(t.header.begin(), t.header.end(), name);
        if (it == t.header.end())
            throw SchemaError("column '" + name + "' missing from '" + file + "'");
        auto col = static_cast<std::size_t>(it - t.header.begin());
        auto assign_once = [&](std::optional<std::size_t>& slot, std::string& slot_name) {
            if (slot) throw SchemaError("schema assigns more than one column to role of '" + name + "'");
            slot = col;
            slot_name = name;
        };
        switch (role) {
        case ColumnRole::feature:
            m.features.push_back(col);
            m.feature_names.push_back(name);
            break;
        case ColumnRole::label: assign_once(m.label, m.label_name); break;
        case ColumnRole::group: assign_once(m.group, m.group_name); break;
        case ColumnRole::aux_score: assign_once(m.aux, m.aux_name); break;
        case ColumnRole::split: assign_once(m.split, m.split_name); break;
        }
    }
    if (!m.label) throw SchemaError("schema has no label column");
    if (m.features.empty()) throw SchemaError("schema has no feature columns");
    return m;
}

double parse_label(const std::string& cell, LabelKind kind, CategoryIndex& classes, std::size_t row,
                   const std::string& col) {
    switch (kind) {
    case LabelKind::regression: {
        auto v = parse_real(cell);
        if (!v) throw ParseError(row, col, "cannot parse '" + cell + "' as a real label");
        return *v;
    }
    case LabelKind::binary: {
        auto v = parse_real(cell);
        if (!v || !(*v == 0.0 || *v == 1.0 || *v == -1.0))
            throw ParseError(row, col, "binary label must be 0, 1 or -1, got '" + cell + "'");
        return *v == 1.0 ? 1.0 : 0.0;
    }
    case LabelKind::multiclass: {
        auto id = classes.lookup_or_insert(cell);
        if (!id) throw ParseError(row, col, "unknown class '" + cell + "'");
        return *id;
    }
    }
    return 0.0;
}

Dataset build_dataset(const RawTable& t, const ColumnMap& m, const std::vector<std::size_t>& rows,
                      const CsvSchema& schema, SplitRole role, CsvDictionaries& dicts) {
    Dataset ds;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(m.features.size());
    ds.features.resize(n, d);
    ds.labels.resize(n);
    ds.label_kind = schema.label_kind;
    ds.role = role;
    std::vector<int> groups;
    Vector aux;
    if (m.group) groups.resize(rows.size());
    if (m.aux) aux.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& cells = t.rows[rows[r]];
        const std::size_t file_row = rows[r] + 1;
        for (Eigen::Index c = 0; c < d; ++c) {
            auto v = parse_real(cells[m.features[c]]);
            if (!v)
                throw ParseError(file_row, m.feature_names[c],
                                 "cannot parse '" + cells[m.features[c]] + "' as a finite real");
            ds.features(r, c) = *v;
        }
        ds.labels[r] = parse_label(cells[*m.label], schema.label_kind, dicts.classes, file_row, m.label_name);
        if (m.group) {
            auto id = dicts.groups.lookup_or_insert(cells[*m.group]);
            groups[r] = *id;
        }
        if (m.aux) {
            auto v = parse_real(cells[*m.aux]);
            if (!v || *v < 0.0 || *v > 1.0)
                throw ParseError(file_row, m.aux_name, "aux score must be a real in [0,1]");
            aux[r] = *v;
        }
    }
    if (schema.label_kind == LabelKind::binary) {
        ds.num_classes = 2;
        ds.class_names = {"0", "1"};
    } else if (schema.label_kind == LabelKind::multiclass) {
        ds.num_classes = dicts.classes.size();
        ds.class_names = dicts.classes.names();
    }
    if (m.group) {
        ds.groups = std::move(groups);
        ds.group_names = dicts.groups.names();
    }
    if (m.aux) ds.aux_scores = std::move(aux);
    return ds;
}

CsvDictionaries make_dicts(const CsvSchema& schema) {
    CsvDictionaries d;
    if (!schema.classes.empty()) d.classes = CategoryIndex(schema.classes);
    return d;
}

void finalize(Dataset& ds, const CsvDictionaries& dicts) {
    if (ds.label_kind == LabelKind::multiclass) {
        ds.num_classes = dicts.classes.size();
        ds.class_names = dicts.classes.names();
    }
    if (ds.groups) ds.group_names = dicts.groups.names();
    ds.validate();
}

} // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema, SplitRole role,
                 CsvDictionaries* dicts) {
    auto table = read_table(path);
    auto cols = map_columns(table, schema, path.string());
    if (cols.split) throw SchemaError("schema has a split column; use load_csv_split");
    CsvDictionaries local = make_dicts(schema);
    CsvDictionaries& use = dicts ? *dicts : local;
    if (dicts && !schema.classes.empty() && use.classes.size() == 0) use.classes = CategoryIndex(schema.classes);
    std::vector<std::size_t> rows(table.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    if (rows.empty()) throw ContractError("'" + path.string() + "' has no data rows");
    auto ds = build_dataset(table, cols, rows, schema, role, use);
    finalize(ds, use);
    return ds;
}

SplitData load_csv_split(const std::filesystem::path& path, const CsvSchema& schema) {
    auto table = read_table(path);
    auto cols = map_columns(table, schema, path.string());
    if (!cols.split) throw SchemaError("schema has no split column");
    std::vector<std::size_t> parts[3];
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& v = table.rows[i][*cols.split];
        if (v == "train") parts[0].push_back(i);
        else if (v == "validation" || v == "val") parts[1].push_back(i);
        else if (v == "test") parts[2].push_back(i);
        else throw ParseError(i + 1, cols.split_name, "unknown split '" + v + "'");
    }
    for (int p = 0; p < 3; ++p)
        if (parts[p].empty()) throw ContractError("split column leaves an empty split");
    auto dicts = make_dicts(schema);
    SplitData out;
    out.train = build_dataset(table, cols, parts[0], schema, SplitRole::train, dicts);
    out.validation = build_dataset(table, cols, parts[1], schema, SplitRole::validation, dicts);
    out.test = build_dataset(table, cols, parts[2], schema, SplitRole::test, dicts);
    for (auto* ds : {&out.train, &out.validation, &out.test}) finalize(*ds, dicts);
    return out;
}

SplitData load_csv_files(const std::filesystem::path& train, const std::filesystem::path& validation,
                         const std::filesystem::path& test, const CsvSchema& schema) {
    auto dicts = make_dicts(schema);
    SplitData out;
    out.train = load_csv(train, schema, SplitRole::train, &dicts);
    out.validation = load_csv(validation, schema, SplitRole::validation, &dicts);
    out.test = load_csv(test, schema, SplitRole::test, &dicts);
    for (auto* ds : {&out.train, &out.validation, &out.test}) finalize(*ds, dicts);
    return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.imbue(std::locale::classic());
    out.precision(17);
    for (Eigen::Index c = 0; c < ds.dim(); ++c) out << "x" << c << ",";
    out << "label";
    if (ds.groups) out << ",group";
    if (ds.aux_scores) out << ",aux";
    out << "\n";
    for (Eigen::Index r = 0; r < ds.size(); ++r) {
        for (Eigen::Index c = 0; c < ds.dim(); ++c) out << ds.features(r, c) << ",";
        if (ds.label_kind == LabelKind::multiclass && !ds.class_names.empty())
            out << ds.class_names[static_cast<std::size_t>(ds.labels[r])];
        else
            out << ds.labels[r];
        if (ds.groups) {
            int g = (*ds.groups)[r];
            if (static_cast<std::size_t>(g) < ds.group_names.size()) out << "," << ds.group_names[g];
            else out << "," << g;
        }
        if (ds.aux_scores) out << "," << (*ds.aux_scores)[r];
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Synthetic task
// ---------------------------------------------------------------------------

void ToySpec::validate() const {
    if (n_train < 1 || n_val < 1 || n_test < 1) throw ContractError("toy split sizes must be positive");
    for (const auto* set : {&beta_train, &beta_test})
        for (const auto& p : *set)
            if (!(p.a > 0.0 && p.b > 0.0)) throw ContractError("beta parameters must be positive");
    if (!(label_noise >= 0.0 && label_noise < 0.5)) throw ContractError("label_noise must lie in [0, 0.5)");
}

namespace {

double sample_beta(Rng& rng, BetaParams p) {
    std::gamma_distribution<double> ga(p.a, 1.0), gb(p.b, 1.0);
    double x = ga(rng);
    double y = gb(rng);
    return x / (x + y);
}

Dataset draw_split(const ToySpec& spec, long n, const std::array<BetaParams, 2>& betas, SplitRole role,
                   std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Dataset ds;
    ds.features.resize(n, 2);
    ds.labels.resize(n);
    ds.label_kind = LabelKind::binary;
    ds.num_classes = 2;
    ds.class_names = {"0", "1"};
    ds.role = role;
    for (long i = 0; i < n; ++i) {
        double x1 = sample_beta(rng, betas[0]);
        double x2 = sample_beta(rng, betas[1]);
        int y = toy_clean_label(x1, x2);
        if (unif(rng) < spec.label_noise) y = 1 - y;
        ds.features(i, 0) = x1;
        ds.features(i, 1) = x2;
        ds.labels[i] = y;
    }
    return ds;
}

} // namespace

SplitData generate_toy(const ToySpec& spec) {
    spec.validate();
    SplitData out;
    out.train = draw_split(spec, spec.n_train, spec.beta_train, SplitRole::train, derive_seed(spec.seed, {0}));
    out.validation = draw_split(spec, spec.n_val, spec.beta_test, SplitRole::validation, derive_seed(spec.seed, {1}));
    out.test = draw_split(spec, spec.n_test, spec.beta_test, SplitRole::test, derive_seed(spec.seed, {2}));
    return out;
}

double beta_log_pdf(double x, BetaParams p) {
    return (p.a - 1.0) * std::log(x) + (p.b - 1.0) * std::log1p(-x) + std::lgamma(p.a + p.b) -
           std::lgamma(p.a) - std::lgamma(p.b);
}

double toy_density_ratio(const ToySpec& spec, double x1, double x2) {
    double log_ratio = beta_log_pdf(x1, spec.beta_test[0]) + beta_log_pdf(x2, spec.beta_test[1]) -
                       beta_log_pdf(x1, spec.beta_train[0]) - beta_log_pdf(x2, spec.beta_train[1]);
    return std::exp(log_ratio);
}

// ---------------------------------------------------------------------------
// Label transforms, scaling
// ---------------------------------------------------------------------------

Dataset transform_labels(const Dataset& ds, LabelTransform kind) {
    Dataset out = ds;
    if (kind == LabelTransform::identity) return out;
    if (ds.label_kind != LabelKind::regression) throw DomainError("log transform requires regression labels");
    for (Eigen::Index i = 0; i < ds.labels.size(); ++i) {
        double y = ds.labels[i];
        if (!(y > 0.0)) throw DomainError("log transform of non-positive label at row " + std::to_string(i));
        out.labels[i] = std::log(y);
    }
    return out;
}

double inverse_transform_label(double value, LabelTransform kind) {
    return kind == LabelTransform::log ? std::exp(value) : value;
}

Vector inverse_transform_labels(const Vector& values, LabelTransform kind) {
    if (kind == LabelTransform::identity) return values;
    return values.array().exp().matrix();
}

Standardizer Standardizer::fit(const Matrix& features) {
    Standardizer s;
    const double n = static_cast<double>(features.rows());
    s.mean = features.colwise().mean().transpose();
    s.scale.resize(features.cols());
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
        double var = (features.col(c).array() - s.mean[c]).square().sum() / n;
        s.scale[c] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
    if (features.cols() != mean.size()) throw ContractError("standardizer dimension mismatch");
    return ((features.rowwise() - mean.transpose()).array().rowwise() * scale.transpose().array()).matrix();
}

Dataset Standardizer::apply(const Dataset& ds) const {
    Dataset out = ds;
    out.features = apply(ds.features);
    return out;
}

} // namespace moew
