#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cdtd {

enum class FeatureKind { Continuous, Categorical };

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    bool is_integer = false;  // continuous features only: round on inversion
};

struct TableSchema {
    std::string name;
    std::vector<FeatureSpec> features;
    std::optional<int> target_index;

    int n_features() const { return static_cast<int>(features.size()); }
    int n_continuous() const;
    int n_categorical() const;
    bool is_continuous(int k) const { return features[k].kind == FeatureKind::Continuous; }

    // throws std::invalid_argument on duplicate names, empty feature list,
    // or a target index out of range
    void validate() const;

    std::string to_json() const;
    static TableSchema from_json(const std::string& text);
    static TableSchema from_json_file(const std::string& path);
};

// Raw table straight out of a CSV: row-major cells, already column-aligned
// with a schema.
struct RawTable {
    TableSchema schema;
    std::vector<std::vector<std::string>> rows;
    int n_dropped = 0;  // rows removed for missing continuous/target cells
};

inline const char* kMissingToken = "(missing)";

}  // namespace cdtd
