#pragma once

#include <string>
#include <vector>

#include "cdtd/dataset.hpp"
#include "cdtd/model.hpp"
#include "cdtd/synthetic.hpp"

namespace cdtd::testing {

// 2 continuous + 2 categorical copula table with a strongly correlated
// continuous pair; the desk-scale dataset used across the integration
// tests.
inline CopulaSpec desk_spec() {
    CopulaSpec spec;
    spec.schema.name = "copula2x2";
    spec.schema.features = {
        {"x0", FeatureKind::Continuous, false},
        {"x1", FeatureKind::Continuous, false},
        {"c0", FeatureKind::Categorical, false},
        {"c1", FeatureKind::Categorical, false},
    };
    spec.slot = {0, 1, 0, 1};
    spec.mixtures = {
        {{1.0, 1.0, 2.0}},
        {{1.0, -0.5, 1.5}},
    };
    spec.cat_probs = {{0.55, 0.45}, {0.5, 0.3, 0.2}};
    spec.cat_labels = {{"a", "b"}, {"u", "v", "w"}};
    spec.latent_corr = {
        {1.0, 0.8, 0.5, 0.0},
        {0.8, 1.0, 0.4, 0.0},
        {0.5, 0.4, 1.0, 0.0},
        {0.0, 0.0, 0.0, 1.0},
    };
    return spec;
}

inline RawTable column_table(const TableSchema& schema,
                             const std::vector<std::vector<std::string>>& columns) {
    RawTable t;
    t.schema = schema;
    size_t n = columns.empty() ? 0 : columns[0].size();
    for (size_t r = 0; r < n; ++r) {
        std::vector<std::string> row;
        for (const auto& col : columns) row.push_back(col[r]);
        t.rows.push_back(row);
    }
    return t;
}

struct Prepared {
    PreprocState preproc;
    Dataset data;
};

inline Prepared prepare(const RawTable& raw) {
    Prepared p;
    p.preproc = fit_preprocessing(raw);
    p.data = encode_dataset(raw, p.preproc);
    return p;
}

inline std::string tmp_path(const std::string& name) {
    return std::string("cdtd_test_") + name;
}

}  // namespace cdtd::testing
