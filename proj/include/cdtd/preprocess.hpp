#pragma once

#include <string>
#include <vector>

#include "cdtd/schema.hpp"

namespace cdtd {

// Rank-based Gaussianization for one continuous column: empirical rank r
// among n maps to norm_ppf(r/(n+1)), ties get the average rank, values
// between knots are linearly interpolated in rank space. A standardization
// to zero mean / unit variance (computed on the training column after the
// rank transform) is folded in.
struct ContinuousPreproc {
    std::vector<double> knot_values;  // strictly increasing, at most 1000
    std::vector<double> knot_ranks;   // matching r/(n+1) ranks, strictly increasing
    double mean = 0.0;                // post-transform standardization
    double stdev = 1.0;

    double apply(double value) const;
    double invert(double transformed) const;  // clamps outside the fitted range
};

struct CategoricalPreproc {
    std::vector<std::string> vocab;   // code -> label, "(missing)" always last
    std::vector<double> proportions;  // training proportions per code
    double entropy = 0.0;             // nats

    int cardinality() const { return static_cast<int>(vocab.size()); }
    int encode(const std::string& label) const;  // throws on unknown label
    const std::string& decode(int code) const;   // throws on out-of-range code
};

struct PreprocState {
    TableSchema schema;
    std::vector<ContinuousPreproc> cont;  // one per continuous feature, schema order
    std::vector<CategoricalPreproc> cat;  // one per categorical feature, schema order
    std::vector<int> slot;                // feature index -> slot in cont/cat

    const ContinuousPreproc& cont_of(int feature) const { return cont[slot[feature]]; }
    const CategoricalPreproc& cat_of(int feature) const { return cat[slot[feature]]; }
};

// Fits on training rows only. Throws on empty input, a continuous column
// with fewer than two distinct values, or a categorical column with fewer
// than two categories.
PreprocState fit_preprocessing(const RawTable& train);

// Fit a single continuous column (exposed for tests).
ContinuousPreproc fit_continuous_column(const std::vector<double>& values,
                                        int max_knots = 1000);
CategoricalPreproc fit_categorical_column(const std::vector<std::string>& labels);

}  // namespace cdtd
