#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cdtd/preprocess.hpp"
#include "cdtd/schema.hpp"

namespace cdtd {

// Column store of a preprocessed table: standardized reals for continuous
// features, integer codes for categorical ones.
struct Dataset {
    TableSchema schema;
    std::vector<std::vector<double>> cont;  // [cont slot][row]
    std::vector<std::vector<int>> cat;      // [cat slot][row]
    int n_rows = 0;
};

Dataset encode_dataset(const RawTable& raw, const PreprocState& preproc);

// Decode one row back to strings (inverting the preprocessing, with
// integer rounding for integer-flagged features).
std::vector<std::string> decode_row(const std::vector<double>& cont_row,
                                    const std::vector<int>& cat_row,
                                    const PreprocState& preproc);

struct SplitIndices {
    std::vector<int> train, valid, test;
};

// Disjoint covering partition of [0, n) with largest-remainder allocation.
// With stratify_labels (one label per row), per-class proportions match the
// overall fractions within one row per class. Deterministic given the seed.
SplitIndices split_indices(int n_rows, const std::array<double, 3>& fractions,
                           const std::vector<std::string>* stratify_labels, uint64_t seed);

RawTable subset(const RawTable& raw, const std::vector<int>& indices);
Dataset subset(const Dataset& data, const std::vector<int>& indices);

}  // namespace cdtd
