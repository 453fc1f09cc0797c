#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cdtd {

// Closed forms of the domain-adapted logistic distribution over normalized
// noise levels sigma in (0,1). cdf/quantile are exact inverses; the pdf is
// the cdf derivative and doubles as the importance weight when fitting.
double cdf_dalog(double sigma_norm, double mu, double nu);
double pdf_dalog(double sigma_norm, double mu, double nu);
double quantile_dalog(double t, double mu, double nu);

enum class ScheduleMode { Single, PerType, PerFeature };

ScheduleMode schedule_mode_from_string(const std::string& s);
std::string schedule_mode_to_string(ScheduleMode m);

// One learnable noise-schedule entity. The constrained parameters
// (0 < mu < 1, nu >= 1, gamma > 0) live behind logit / shifted-softplus /
// log reparameterizations so gradient steps cannot leave the valid set.
struct ScheduleParams {
    double raw_mu = 0.0;
    double raw_nu = 0.0;
    double raw_gamma = 0.0;
    double sigma_min = 0.0;
    double sigma_max = 80.0;

    // Adam state for the three raw parameters
    double adam_m[3] = {0.0, 0.0, 0.0};
    double adam_v[3] = {0.0, 0.0, 0.0};
    int64_t adam_step = 0;

    double mu() const;
    double nu() const;
    double gamma() const;

    static ScheduleParams init(double mu, double nu, double gamma, double sigma_min,
                               double sigma_max);

    // gamma * cdf(sigma normalized by this entity's bounds)
    double predict_loss(double sigma) const;

    // One Adam step on sum_i w_i * (loss_i - gamma*F(sigma_i))^2 / B with
    // w_i = 1 / max(pdf(sigma_i), w_floor). sigma values are normalized.
    // Rejects NaN losses.
    void fit_step(std::span<const std::pair<double, double>> sigma_loss_batch,
                  double learning_rate);

    static constexpr double kWeightFloor = 1e-3;
};

// Feature -> schedule-entity resolution for the three modes. Noise bounds
// stay type-specific in every mode (continuous up to 80, categorical up to
// 100 by default); only the warp parameters are shared or split.
struct ScheduleRegistry {
    ScheduleMode mode = ScheduleMode::PerType;
    std::vector<ScheduleParams> entries;
    std::vector<uint8_t> feature_is_cont;  // per diffused feature
    std::vector<int> entry_of_feature;
    double sigma_min_cont = 0.0, sigma_max_cont = 80.0;
    double sigma_min_cat = 0.0, sigma_max_cat = 100.0;

    static ScheduleRegistry create(ScheduleMode mode, const std::vector<uint8_t>& is_cont,
                                   double sigma_max_cont = 80.0, double sigma_max_cat = 100.0);

    int n_features() const { return static_cast<int>(feature_is_cont.size()); }
    const ScheduleParams& entry_for(int feature) const { return entries[entry_of_feature[feature]]; }
    ScheduleParams& entry_for(int feature) { return entries[entry_of_feature[feature]]; }

    double sigma_lo(int feature) const { return feature_is_cont[feature] ? sigma_min_cont : sigma_min_cat; }
    double sigma_hi(int feature) const { return feature_is_cont[feature] ? sigma_max_cont : sigma_max_cat; }

    // sigma_min + (sigma_max - sigma_min) * quantile(t clamped to
    // [eps, 1-eps]); nondecreasing in t.
    double sigma_of_t(double t, int feature) const;

    // normalized noise level for a feature at time t (shared by all
    // features resolving to the same entry)
    double sigma_norm_of_t(double t, int feature) const;

    static constexpr double kTimeClamp = 1e-5;
};

// Diagnostic grid of (t, sigma per entry) rows for plotting.
void write_sigma_grid_csv(const ScheduleRegistry& registry,
                          const std::vector<std::string>& feature_names,
                          const std::string& path, int n_points = 201);

}  // namespace cdtd
