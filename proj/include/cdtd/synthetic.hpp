#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdtd/schema.hpp"

namespace cdtd {

// Ground-truth table generator: a Gaussian copula couples mixture-of-
// Gaussian continuous marginals with thresholded-latent categorical
// features, so the correlation structure of the output is known exactly.
struct CopulaSpec {
    struct Component {
        double weight = 1.0;
        double mean = 0.0;
        double std = 1.0;
    };
    TableSchema schema;
    std::vector<std::vector<Component>> mixtures;    // per cont slot
    std::vector<std::vector<double>> cat_probs;      // per cat slot
    std::vector<std::vector<std::string>> cat_labels;
    std::vector<std::vector<double>> latent_corr;    // K x K, positive definite
    std::vector<int> slot;

    static CopulaSpec from_json(const std::string& text);
    static CopulaSpec from_json_file(const std::string& path);
    void validate() const;
};

RawTable make_synthetic(const CopulaSpec& spec, int n_rows, uint64_t seed);
void make_synthetic_csv(const CopulaSpec& spec, int n_rows, uint64_t seed,
                        const std::string& path);

}  // namespace cdtd
