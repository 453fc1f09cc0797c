#include "cdtd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdtd {

EDMCoefficients edm_coefficients(double sigma) {
    if (!(sigma >= 0.0)) throw std::domain_error("edm_coefficients: sigma must be >= 0");
    EDMCoefficients c;
    double s2 = sigma * sigma;
    c.c_skip = 1.0 / (s2 + 1.0);
    c.c_out = sigma / std::sqrt(s2 + 1.0);
    c.lambda = (sigma > 0.0) ? 1.0 / (c.c_out * c.c_out) : std::numeric_limits<double>::infinity();
    return c;
}

double mse_loss_cont(double x0, double x_t, double F, double sigma) {
    auto c = edm_coefficients(sigma);
    double denoised = c.c_skip * x_t + c.c_out * F;
    double e = denoised - x0;
    return c.lambda * e * e;
}

double d_mse_d_output(double x0, double x_t, double F, double sigma) {
    auto c = edm_coefficients(sigma);
    double denoised = c.c_skip * x_t + c.c_out * F;
    return 2.0 * c.lambda * (denoised - x0) * c.c_out;
}

template <typename T>
void softmax(std::span<const T> logits, std::span<double> probs) {
    double m = static_cast<double>(logits[0]);
    for (auto l : logits) m = std::max(m, static_cast<double>(l));
    double z = 0.0;
    for (size_t c = 0; c < logits.size(); ++c) {
        probs[c] = std::exp(static_cast<double>(logits[c]) - m);
        z += probs[c];
    }
    for (auto& p : probs) p /= z;
}

template <typename T>
double ce_loss_cat(int true_code, std::span<const T> logits, double z_entropy) {
    if (!(z_entropy > 0.0)) throw std::domain_error("ce_loss_cat: entropy must be > 0");
    double m = static_cast<double>(logits[0]);
    for (auto l : logits) m = std::max(m, static_cast<double>(l));
    double z = 0.0;
    for (auto l : logits) z += std::exp(static_cast<double>(l) - m);
    double log_z = m + std::log(z);
    return (log_z - static_cast<double>(logits[true_code])) / z_entropy;
}

template <typename T>
void d_ce_d_logits(int true_code, std::span<const T> logits, double z_entropy,
                   std::span<double> grad) {
    softmax(logits, grad);
    grad[true_code] -= 1.0;
    for (auto& g : grad) g /= z_entropy;
}

double joint_loss(std::span<const double> per_feature_losses) {
    if (per_feature_losses.empty()) throw std::invalid_argument("joint_loss: no features");
    double s = 0.0;
    for (double l : per_feature_losses) s += l;
    return s / static_cast<double>(per_feature_losses.size());
}

void LossNormalizer::init(Rng& rng) {
    freq.resize(kFreqs);
    for (auto& f : freq) f = rng.normal() * kFreqStd;
    w.assign(2 * kFreqs, 0.0);
    b = 0.0;
    adam_m.assign(2 * kFreqs, 0.0);
    adam_v.assign(2 * kFreqs, 0.0);
    adam_mb = adam_vb = 0.0;
    adam_step = 0;
}

void LossNormalizer::features(double t, std::span<double> phi) const {
    double c_noise = std::log(std::max(t, kTimeFloor)) / 4.0;
    constexpr double two_pi = 6.283185307179586476925287;
    const double scale = std::sqrt(2.0 / (2 * kFreqs));  // unit-norm feature vector
    for (int i = 0; i < kFreqs; ++i) {
        double arg = two_pi * freq[i] * c_noise;
        phi[2 * i] = scale * std::cos(arg);
        phi[2 * i + 1] = scale * std::sin(arg);
    }
}

double LossNormalizer::predict(double t) const {
    std::vector<double> phi(2 * kFreqs);
    features(t, phi);
    double pre = b;
    for (int i = 0; i < 2 * kFreqs; ++i) pre += w[i] * phi[i];
    return std::exp(pre);
}

void LossNormalizer::fit_step(std::span<const std::pair<double, double>> batch, double lr) {
    if (batch.empty()) return;
    std::vector<double> g_w(2 * kFreqs, 0.0);
    double g_b = 0.0;
    std::vector<double> phi(2 * kFreqs);
    for (const auto& [t, observed] : batch) {
        if (!std::isfinite(observed)) throw std::invalid_argument("normalizer: non-finite loss");
        features(t, phi);
        double pre = b;
        for (int i = 0; i < 2 * kFreqs; ++i) pre += w[i] * phi[i];
        double pred = std::exp(pre);
        double d_pre = 2.0 * (pred - observed) * pred;  // d MSE / d pre-activation
        for (int i = 0; i < 2 * kFreqs; ++i) g_w[i] += d_pre * phi[i];
        g_b += d_pre;
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    ++adam_step;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_step));
    for (int i = 0; i < 2 * kFreqs; ++i) {
        double g = g_w[i] * inv_b;
        adam_m[i] = b1 * adam_m[i] + (1.0 - b1) * g;
        adam_v[i] = b2 * adam_v[i] + (1.0 - b2) * g * g;
        double upd = lr * (adam_m[i] / c1) / (std::sqrt(adam_v[i] / c2) + eps);
        if (upd != 0.0) w[i] -= upd;
    }
    double g = g_b * inv_b;
    adam_mb = b1 * adam_mb + (1.0 - b1) * g;
    adam_vb = b2 * adam_vb + (1.0 - b2) * g * g;
    double upd = lr * (adam_mb / c1) / (std::sqrt(adam_vb / c2) + eps);
    if (upd != 0.0) b -= upd;
}

std::vector<double> antithetic_timesteps(int batch_size, Rng& rng) {
    if (batch_size < 1) throw std::invalid_argument("antithetic_timesteps: batch must be >= 1");
    double u = rng.uniform();
    std::vector<double> t(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        double x = u + static_cast<double>(i) / static_cast<double>(batch_size);
        t[i] = x - std::floor(x);
    }
    return t;
}

template void softmax<float>(std::span<const float>, std::span<double>);
template void softmax<double>(std::span<const double>, std::span<double>);
template double ce_loss_cat<float>(int, std::span<const float>, double);
template double ce_loss_cat<double>(int, std::span<const double>, double);
template void d_ce_d_logits<float>(int, std::span<const float>, double, std::span<double>);
template void d_ce_d_logits<double>(int, std::span<const double>, double, std::span<double>);

}  // namespace cdtd
