#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdtd/model.hpp"

namespace cdtd {

struct SampleConfig {
    int n_rows = 0;
    int steps = 200;
    uint64_t seed = 0;
    int64_t row_offset = 0;  // shifts the per-row streams; generating rows
                             // [0,2n) equals [0,n) plus offset-n [0,n)
    int threads = 0;         // 0 = CDTD_THREADS env or hardware concurrency
};

// Prior draw for one row: continuous scalars ~ N(0, sigma_cont_max^2),
// categorical embedding states ~ N(0, sigma_cat_max^2 I_d). Draw order:
// class label (conditional models), continuous features, categorical
// features.
void sample_prior_row(const Model& model, Rng& row_rng, std::span<float> x_cont,
                      std::span<float> x_cat, int* y_out);

// Score-interpolation drift: x_hat0 = sum_c probs[c] * embeds[c], returns
// (x_t - x_hat0) / sigma. embeds is C x d row-major.
void categorical_drift(std::span<const double> x_t, std::span<const double> probs,
                       const double* embeds, int n_classes, int dim, double sigma,
                       std::span<double> drift_out);

// One deterministic Euler update of a row state given per-feature denoised
// targets; every feature steps by its own delta sigma. The double
// instantiation exists so exactness oracles can run the production update
// rule without float accumulation noise.
template <typename T>
void euler_step_row(std::span<T> x_cont, std::span<T> x_cat,
                    std::span<const double> xhat_cont, std::span<const double> xhat_cat,
                    const ScheduleRegistry& registry, int embed_dim, double t_s,
                    double t_next);

// argmax with ties resolved toward the lowest code
int argmax_lowest(std::span<const double> probs);

// Full reverse process on EMA weights; returns decoded rows in original
// units and labels, schema column order. Deterministic given the seed for
// any thread count.
std::vector<std::vector<std::string>> generate(const Model& model, const SampleConfig& config);

void generate_to_csv(const Model& model, const SampleConfig& config, const std::string& path);

int resolve_threads(int requested);

}  // namespace cdtd
