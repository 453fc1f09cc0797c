#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cdtd/rng.hpp"

namespace cdtd {

// EDM coefficients with sigma_data = 1 (features are standardized to unit
// variance, so this is not configurable).
struct EDMCoefficients {
    double c_skip;
    double c_out;
    double lambda;  // 1 / c_out^2
};

EDMCoefficients edm_coefficients(double sigma);

// lambda * (c_skip*x_t + c_out*F - x0)^2; calibrated for unit-variance x0
double mse_loss_cont(double x0, double x_t, double F, double sigma);
double d_mse_d_output(double x0, double x_t, double F, double sigma);

// numerically stable softmax / cross-entropy over logits
template <typename T>
void softmax(std::span<const T> logits, std::span<double> probs);

// cross-entropy in nats divided by the feature entropy Z_j
template <typename T>
double ce_loss_cat(int true_code, std::span<const T> logits, double z_entropy);

// d(CE/Z)/d logit_c = (softmax_c - [c == true]) / Z
template <typename T>
void d_ce_d_logits(int true_code, std::span<const T> logits, double z_entropy,
                   std::span<double> grad);

// arithmetic mean of the K calibrated per-feature losses
double joint_loss(std::span<const double> per_feature_losses);

// Tiny Fourier-feature regressor predicting the average diffusion loss
// L(t). Zero-initialized so the prediction is exactly 1 everywhere at
// model initialization; trained by MSE with its own Adam buffers. Its
// prediction is used detached, so it never feeds gradients back into the
// score model.
class LossNormalizer {
public:
    static constexpr int kFreqs = 512;  // sin/cos pairs -> 1024 features
    static constexpr double kFreqStd = 16.0;
    static constexpr double kTimeFloor = 1e-5;

    void init(Rng& rng);
    double predict(double t) const;
    void fit_step(std::span<const std::pair<double, double>> t_loss_batch, double lr);

    std::vector<double> freq;  // kFreqs
    std::vector<double> w;     // 2*kFreqs
    double b = 0.0;

    std::vector<double> adam_m, adam_v;
    double adam_mb = 0.0, adam_vb = 0.0;
    int64_t adam_step = 0;

private:
    void features(double t, std::span<double> phi) const;
};

// stratified uniform timesteps t_i = frac(u + i/B) sharing one draw
std::vector<double> antithetic_timesteps(int batch_size, Rng& rng);

}  // namespace cdtd
