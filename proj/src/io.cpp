#include "moew/io.hpp"

#include "moew/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace moew {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& token) {
    if (token == "nan") return std::nan("");
    if (token == "inf") return std::numeric_limits<double>::infinity();
    if (token == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty())
        throw ContractError("not a number: '" + token + "'");
    return v;
}

void Archive::put(const std::string& name, const Matrix& m) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw ContractError("archive names must be nonempty and contain no whitespace");
    if (!has(name)) order_.push_back(name);
    text_.erase(name);
    numeric_[name] = m;
}

void Archive::put(const std::string& name, const Vector& v) { put(name, Matrix(v)); }

void Archive::put(const std::string& name, double value) { put(name, Matrix(Matrix::Constant(1, 1, value))); }

void Archive::put_text(const std::string& name, const std::string& value) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw ContractError("archive names must be nonempty and contain no whitespace");
    if (value.find('\n') != std::string::npos) throw ContractError("archive text must be a single line");
    if (!has(name)) order_.push_back(name);
    numeric_.erase(name);
    text_[name] = value;
}

bool Archive::has(const std::string& name) const { return numeric_.count(name) || text_.count(name); }

const Matrix& Archive::matrix(const std::string& name) const {
    auto it = numeric_.find(name);
    if (it == numeric_.end()) throw ContractError("archive has no numeric entry '" + name + "'");
    return it->second;
}

Vector Archive::vector(const std::string& name) const {
    const Matrix& m = matrix(name);
    if (m.cols() != 1 && m.rows() != 0) throw ContractError("archive entry '" + name + "' is not a column");
    return m.col(0);
}

double Archive::scalar(const std::string& name) const {
    const Matrix& m = matrix(name);
    if (m.size() != 1) throw ContractError("archive entry '" + name + "' is not a scalar");
    return m(0, 0);
}

const std::string& Archive::text(const std::string& name) const {
    auto it = text_.find(name);
    if (it == text_.end()) throw ContractError("archive has no text entry '" + name + "'");
    return it->second;
}

void Archive::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& name : order_) {
        if (auto t = text_.find(name); t != text_.end()) {
            out << name << " text " << t->second << '\n';
            continue;
        }
        const Matrix& m = numeric_.at(name);
        out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_double(m(i, j));
            out << '\n';
        }
    }
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

Archive Archive::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    Archive ar;
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) {
        throw Error(path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream head(line);
        std::string name, a;
        head >> name >> a;
        if (a == "text") {
            const auto pos = line.find(" text ");
            ar.put_text(name, pos == std::string::npos ? std::string() : line.substr(pos + 6));
            continue;
        }
        std::string b;
        head >> b;
        long rows = 0, cols = 0;
        try {
            rows = static_cast<long>(parse_double(a));
            cols = static_cast<long>(parse_double(b));
        } catch (const ContractError&) {
            fail("bad entry header");
        }
        if (rows < 0 || cols < 0) fail("negative shape");
        Matrix m(rows, cols);
        for (long i = 0; i < rows; ++i) {
            if (!std::getline(in, line)) fail("truncated entry '" + name + "'");
            ++lineno;
            std::istringstream row(line);
            std::string tok;
            for (long j = 0; j < cols; ++j) {
                if (!(row >> tok)) fail("short row in '" + name + "'");
                try {
                    m(i, j) = parse_double(tok);
                } catch (const ContractError& e) {
                    fail(e.what());
                }
            }
            if (row >> tok) fail("long row in '" + name + "'");
        }
        ar.put(name, m);
    }
    return ar;
}

void save_params(Archive& ar, const std::string& prefix, const ModelParams& params) {
    ar.put(prefix + "layers", static_cast<double>(params.num_layers()));
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        ar.put(prefix + "W" + std::to_string(l), params.weights[l]);
        ar.put(prefix + "b" + std::to_string(l), params.biases[l]);
    }
}

ModelParams load_params(const Archive& ar, const std::string& prefix) {
    const auto layers = static_cast<std::size_t>(ar.scalar(prefix + "layers"));
    ModelParams p;
    for (std::size_t l = 0; l < layers; ++l) {
        p.weights.push_back(ar.matrix(prefix + "W" + std::to_string(l)));
        p.biases.push_back(ar.vector(prefix + "b" + std::to_string(l)));
        if (p.biases.back().size() != p.weights.back().cols() ||
            (l > 0 && p.weights[l].rows() != p.weights[l - 1].cols()))
            throw ContractError("inconsistent layer shapes in archive");
    }
    return p;
}

const char* to_string(EmbedderKind kind) {
    return kind == EmbedderKind::autoencoder ? "autoencoder" : "label_passthrough";
}

const char* to_string(LabelTransform kind) { return kind == LabelTransform::identity ? "identity" : "log"; }

EmbedderKind parse_embedder_kind(const std::string& s) {
    if (s == "autoencoder") return EmbedderKind::autoencoder;
    if (s == "label_passthrough") return EmbedderKind::label_passthrough;
    throw ContractError("unknown embedding kind '" + s + "'");
}

LabelKind parse_label_kind(const std::string& s) {
    if (s == "regression") return LabelKind::regression;
    if (s == "binary") return LabelKind::binary;
    if (s == "multiclass") return LabelKind::multiclass;
    throw ContractError("unknown label kind '" + s + "'");
}

ImportanceKind parse_importance_kind(const std::string& s) {
    for (auto k : {ImportanceKind::class_ratio, ImportanceKind::histogram, ImportanceKind::constant_one,
                   ImportanceKind::user_supplied})
        if (s == to_string(k)) return k;
    throw ContractError("unknown importance kind '" + s + "'");
}

LabelTransform parse_label_transform(const std::string& s) {
    if (s == "identity") return LabelTransform::identity;
    if (s == "log") return LabelTransform::log;
    throw ContractError("unknown label transform '" + s + "'");
}

void save_embedder(Archive& ar, const Embedder& e) {
    ar.put_text("embedder.kind", to_string(e.kind));
    ar.put_text("embedder.label_kind", to_string(e.label_kind));
    ar.put("embedder.num_classes", static_cast<double>(e.num_classes));
    ar.put("embedder.offsets", e.offsets);
    if (e.kind == EmbedderKind::autoencoder) save_params(ar, "encoder.", e.encoder);
}

Embedder load_embedder(const Archive& ar) {
    Embedder e;
    e.kind = parse_embedder_kind(ar.text("embedder.kind"));
    e.label_kind = parse_label_kind(ar.text("embedder.label_kind"));
    e.num_classes = static_cast<int>(ar.scalar("embedder.num_classes"));
    e.offsets = ar.vector("embedder.offsets");
    if (e.kind == EmbedderKind::autoencoder) e.encoder = load_params(ar, "encoder.");
    return e;
}

void save_importance(Archive& ar, const ImportanceTable& t) {
    ar.put_text("importance.kind", to_string(t.kind));
    ar.put("importance.floor", t.floor);
    ar.put("importance.class_ratio", t.class_ratio);
    ar.put("importance.bin_edges", t.bin_edges);
    ar.put("importance.bin_ratio", t.bin_ratio);
}

ImportanceTable load_importance(const Archive& ar) {
    ImportanceTable t;
    t.kind = parse_importance_kind(ar.text("importance.kind"));
    t.floor = ar.scalar("importance.floor");
    t.class_ratio = ar.vector("importance.class_ratio");
    t.bin_edges = ar.vector("importance.bin_edges");
    t.bin_ratio = ar.vector("importance.bin_ratio");
    return t;
}

void save_standardizer(Archive& ar, const Standardizer& s) {
    ar.put("standardizer.mean", s.mean);
    ar.put("standardizer.scale", s.scale);
}

Standardizer load_standardizer(const Archive& ar) {
    Standardizer s;
    s.mean = ar.vector("standardizer.mean");
    s.scale = ar.vector("standardizer.scale");
    if (s.mean.size() != s.scale.size()) throw ContractError("standardizer mean and scale differ in length");
    return s;
}

} // namespace moew
