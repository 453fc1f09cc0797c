#include "cdtd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "cdtd/mathx.hpp"

namespace cdtd {

namespace {

void check_unit_interval(double x, const char* who) {
    if (!(x > 0.0 && x < 1.0))
        throw std::domain_error(std::string(who) + ": argument must be in (0,1)");
}

double z_term(double sigma, double mu, double nu) {
    // Z = ((sigma/(1-sigma)) * ((1-mu)/mu))^(-nu), evaluated in log space
    return std::exp(-nu * (logit(sigma) - logit(mu)));
}

}  // namespace

double cdf_dalog(double sigma_norm, double mu, double nu) {
    check_unit_interval(sigma_norm, "cdf_dalog");
    check_unit_interval(mu, "cdf_dalog");
    return 1.0 / (1.0 + z_term(sigma_norm, mu, nu));
}

double pdf_dalog(double sigma_norm, double mu, double nu) {
    check_unit_interval(sigma_norm, "pdf_dalog");
    check_unit_interval(mu, "pdf_dalog");
    double z = z_term(sigma_norm, mu, nu);
    double denom = (1.0 + z) * (1.0 + z);
    return nu / (sigma_norm * (1.0 - sigma_norm)) * z / denom;
}

double quantile_dalog(double t, double mu, double nu) {
    check_unit_interval(t, "quantile_dalog");
    check_unit_interval(mu, "quantile_dalog");
    return sigmoid(logit(mu) + logit(t) / nu);
}

ScheduleMode schedule_mode_from_string(const std::string& s) {
    if (s == "single") return ScheduleMode::Single;
    if (s == "per_type") return ScheduleMode::PerType;
    if (s == "per_feature") return ScheduleMode::PerFeature;
    throw std::invalid_argument("unknown schedule mode '" + s + "'");
}

std::string schedule_mode_to_string(ScheduleMode m) {
    switch (m) {
        case ScheduleMode::Single: return "single";
        case ScheduleMode::PerType: return "per_type";
        case ScheduleMode::PerFeature: return "per_feature";
    }
    return "?";
}

double ScheduleParams::mu() const { return sigmoid(raw_mu); }
double ScheduleParams::nu() const { return 1.0 + softplus(raw_nu); }
double ScheduleParams::gamma() const { return std::exp(raw_gamma); }

ScheduleParams ScheduleParams::init(double mu, double nu, double gamma, double sigma_min,
                                    double sigma_max) {
    if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("schedule: mu must be in (0,1)");
    if (!(nu > 1.0)) throw std::invalid_argument("schedule: nu must be > 1");
    if (!(gamma > 0.0)) throw std::invalid_argument("schedule: gamma must be > 0");
    if (!(sigma_max > sigma_min)) throw std::invalid_argument("schedule: bad sigma bounds");
    ScheduleParams p;
    p.raw_mu = logit(mu);
    p.raw_nu = softplus_inv(nu - 1.0);
    p.raw_gamma = std::log(gamma);
    p.sigma_min = sigma_min;
    p.sigma_max = sigma_max;
    return p;
}

double ScheduleParams::predict_loss(double sigma) const {
    if (!(sigma >= sigma_min && sigma <= sigma_max))
        throw std::domain_error("predict_loss: sigma outside schedule bounds");
    double sn = (sigma - sigma_min) / (sigma_max - sigma_min);
    sn = std::clamp(sn, 1e-7, 1.0 - 1e-7);
    return gamma() * cdf_dalog(sn, mu(), nu());
}

void ScheduleParams::fit_step(std::span<const std::pair<double, double>> batch,
                              double learning_rate) {
    if (batch.empty()) return;

    const double mu_v = mu();
    const double nu_v = nu();
    const double gamma_v = gamma();
    const double logit_mu = logit(mu_v);
    const double dnu_draw = sigmoid(raw_nu);  // softplus'

    double g_mu = 0.0, g_nu = 0.0, g_gamma = 0.0;
    for (const auto& [sigma_raw, loss] : batch) {
        if (std::isnan(loss)) throw std::invalid_argument("fit_step: NaN loss");
        if (!(loss >= 0.0) || !std::isfinite(loss))
            throw std::invalid_argument("fit_step: loss must be finite and >= 0");
        double sn = std::clamp(sigma_raw, 1e-7, 1.0 - 1e-7);

        double z = std::exp(-nu_v * (logit(sn) - logit_mu));
        double denom = (1.0 + z) * (1.0 + z);
        double f = 1.0 / (1.0 + z);
        double pdf = nu_v / (sn * (1.0 - sn)) * z / denom;
        double w = 1.0 / std::max(pdf, kWeightFloor);

        double e = loss - gamma_v * f;
        // d(w e^2)/d raw parameters through the reparameterization
        g_mu += 2.0 * w * e * gamma_v * nu_v * z / denom;
        g_nu += -2.0 * w * e * gamma_v * z * (logit(sn) - logit_mu) / denom * dnu_draw;
        g_gamma += -2.0 * w * e * f * gamma_v;
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double grads[3] = {g_mu * inv_b, g_nu * inv_b, g_gamma * inv_b};
    double* params[3] = {&raw_mu, &raw_nu, &raw_gamma};

    ++adam_step;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_step));
    for (int i = 0; i < 3; ++i) {
        adam_m[i] = b1 * adam_m[i] + (1.0 - b1) * grads[i];
        adam_v[i] = b2 * adam_v[i] + (1.0 - b2) * grads[i] * grads[i];
        double update = learning_rate * (adam_m[i] / c1) / (std::sqrt(adam_v[i] / c2) + eps);
        if (update != 0.0) *params[i] -= update;
    }
}

ScheduleRegistry ScheduleRegistry::create(ScheduleMode mode, const std::vector<uint8_t>& is_cont,
                                          double sigma_max_cont, double sigma_max_cat) {
    if (is_cont.empty()) throw std::invalid_argument("schedule registry: no features");
    ScheduleRegistry reg;
    reg.mode = mode;
    reg.feature_is_cont = is_cont;
    reg.sigma_max_cont = sigma_max_cont;
    reg.sigma_max_cat = sigma_max_cat;
    reg.entry_of_feature.resize(is_cont.size());

    const double mu0 = 0.25, nu0 = 1.0 + 1e-2, gamma0 = 1.0;
    switch (mode) {
        case ScheduleMode::Single:
            reg.entries.push_back(
                ScheduleParams::init(mu0, nu0, gamma0, reg.sigma_min_cont, sigma_max_cont));
            std::fill(reg.entry_of_feature.begin(), reg.entry_of_feature.end(), 0);
            break;
        case ScheduleMode::PerType:
            reg.entries.push_back(
                ScheduleParams::init(mu0, nu0, gamma0, reg.sigma_min_cont, sigma_max_cont));
            reg.entries.push_back(
                ScheduleParams::init(mu0, nu0, gamma0, reg.sigma_min_cat, sigma_max_cat));
            for (size_t k = 0; k < is_cont.size(); ++k)
                reg.entry_of_feature[k] = is_cont[k] ? 0 : 1;
            break;
        case ScheduleMode::PerFeature:
            for (size_t k = 0; k < is_cont.size(); ++k) {
                reg.entry_of_feature[k] = static_cast<int>(reg.entries.size());
                reg.entries.push_back(ScheduleParams::init(
                    mu0, nu0, gamma0, is_cont[k] ? reg.sigma_min_cont : reg.sigma_min_cat,
                    is_cont[k] ? sigma_max_cont : sigma_max_cat));
            }
            break;
    }
    return reg;
}

double ScheduleRegistry::sigma_norm_of_t(double t, int feature) const {
    if (feature < 0 || feature >= n_features())
        throw std::invalid_argument("schedule registry: unknown feature");
    double tc = std::clamp(t, kTimeClamp, 1.0 - kTimeClamp);
    const auto& e = entry_for(feature);
    return quantile_dalog(tc, e.mu(), e.nu());
}

double ScheduleRegistry::sigma_of_t(double t, int feature) const {
    double q = sigma_norm_of_t(t, feature);
    return sigma_lo(feature) + (sigma_hi(feature) - sigma_lo(feature)) * q;
}

void write_sigma_grid_csv(const ScheduleRegistry& registry,
                          const std::vector<std::string>& feature_names,
                          const std::string& path, int n_points) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t";
    for (const auto& n : feature_names) out << ",sigma_" << n;
    out << "\n";
    char buf[64];
    for (int i = 0; i < n_points; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(n_points - 1);
        std::snprintf(buf, sizeof(buf), "%.6f", t);
        out << buf;
        for (int k = 0; k < registry.n_features(); ++k) {
            std::snprintf(buf, sizeof(buf), ",%.8g", registry.sigma_of_t(t, k));
            out << buf;
        }
        out << "\n";
    }
}

}  // namespace cdtd
