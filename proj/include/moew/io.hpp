#pragma once

#include "moew/data.hpp"
#include "moew/embed.hpp"
#include "moew/nn.hpp"
#include "moew/weights.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace moew {

/// Flat text archive of named entries. Each entry is a header line
/// `<name> <rows> <cols>` followed by `rows` lines of `cols` values, or
/// `<name> text <value>` for a string. Numbers round-trip exactly.
class Archive {
public:
    void put(const std::string& name, const Matrix& m);
    void put(const std::string& name, const Vector& v);  // stored as a column
    void put(const std::string& name, double value);
    void put_text(const std::string& name, const std::string& value);

    bool has(const std::string& name) const;
    const Matrix& matrix(const std::string& name) const;
    Vector vector(const std::string& name) const;
    double scalar(const std::string& name) const;
    const std::string& text(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    static Archive load(const std::filesystem::path& path);

private:
    std::vector<std::string> order_;
    std::map<std::string, Matrix> numeric_;
    std::map<std::string, std::string> text_;
};

void save_params(Archive& ar, const std::string& prefix, const ModelParams& params);
ModelParams load_params(const Archive& ar, const std::string& prefix);

void save_embedder(Archive& ar, const Embedder& e);
Embedder load_embedder(const Archive& ar);

void save_importance(Archive& ar, const ImportanceTable& t);
ImportanceTable load_importance(const Archive& ar);

void save_standardizer(Archive& ar, const Standardizer& s);
Standardizer load_standardizer(const Archive& ar);

/// Shortest decimal text that parses back to the same double ("nan", "inf", "-inf" otherwise).
std::string format_double(double v);
/// Locale-independent parse of a whole token. Throws ContractError on junk.
double parse_double(const std::string& token);

const char* to_string(EmbedderKind kind);
const char* to_string(LabelTransform kind);
EmbedderKind parse_embedder_kind(const std::string& s);
LabelKind parse_label_kind(const std::string& s);
ImportanceKind parse_importance_kind(const std::string& s);
LabelTransform parse_label_transform(const std::string& s);

} // namespace moew
