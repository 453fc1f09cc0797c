#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "cdtd/rng.hpp"
#include "cdtd/schedule.hpp"

using namespace cdtd;

TEST_CASE("cdf hits 1/2 at the inflection point for any parameters") {
    for (double mu : {0.1, 0.25, 0.5, 0.9}) {
        for (double nu : {1.0, 2.5, 7.0}) {
            CHECK(cdf_dalog(mu, mu, nu) == doctest::Approx(0.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("cdf hand value: F(0.5; mu=0.25, nu=1) = 0.75 exactly") {
    // Z = (1 * 3)^-1 = 1/3, F = 1/(1 + 1/3) = 3/4
    CHECK(std::fabs(cdf_dalog(0.5, 0.25, 1.0) - 0.75) <= 1e-15);
}

TEST_CASE("cdf limits and monotonicity") {
    CHECK(cdf_dalog(1e-9, 0.25, 1.0) < 1e-6);
    CHECK(cdf_dalog(1.0 - 1e-9, 0.25, 1.0) > 1.0 - 1e-6);
    double prev = 0.0;
    for (int i = 1; i < 1000; ++i) {
        double f = cdf_dalog(i / 1000.0, 0.3, 2.0);
        CHECK(f > prev);
        prev = f;
    }
    CHECK_THROWS_AS(cdf_dalog(0.0, 0.25, 1.0), std::domain_error);
    CHECK_THROWS_AS(cdf_dalog(1.0, 0.25, 1.0), std::domain_error);
}

TEST_CASE("quantile: median equals mu, hand value inverts the cdf example") {
    CHECK(quantile_dalog(0.5, 0.25, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(quantile_dalog(0.5, 0.7, 4.0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(quantile_dalog(0.75, 0.25, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cdf/quantile round trip below 1e-9 on a dense grid") {
    const int n = 10000;
    // at the nu = 1 initialization the full grid (minus the 1e-6 bands) is
    // representable; steeper curves saturate the cdf against 1.0 in double
    // precision, so the round trip is checked where 1-F is itself above
    // the double noise floor
    for (double mu : {0.25, 0.5, 0.8}) {
        for (double nu : {1.0, 3.0}) {
            double worst = 0.0;
            int checked = 0;
            for (int i = 1; i < n; ++i) {
                double sigma = (static_cast<double>(i) + 0.5) / n;
                if (sigma < 1e-6 || sigma > 1.0 - 1e-6) continue;
                double f = cdf_dalog(sigma, mu, nu);
                if (f < 1e-10 || f > 1.0 - 1e-10) continue;
                double back = quantile_dalog(f, mu, nu);
                worst = std::max(worst, std::fabs(back - sigma));
                ++checked;
            }
            CHECK(checked > n / 2);
            CHECK(worst <= 1e-9);
        }
    }
}

TEST_CASE("quantile/cdf round trip is tight for all t and steepness") {
    const int n = 10000;
    for (double mu : {0.25, 0.6}) {
        for (double nu : {1.0, 3.0, 8.0}) {
            double worst = 0.0;
            for (int i = 1; i < n; ++i) {
                double t = (static_cast<double>(i) + 0.5) / n;
                double back = cdf_dalog(quantile_dalog(t, mu, nu), mu, nu);
                worst = std::max(worst, std::fabs(back - t) / t);
            }
            CHECK(worst <= 1e-9);
        }
    }
}

TEST_CASE("pdf hand value at sigma = mu = 0.25, nu = 1") {
    // Z = 1 there: f = 1/(0.25*0.75) * 1/4 = 4/3
    CHECK(pdf_dalog(0.25, 0.25, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("pdf integrates to one and to cdf differences") {
    const int n = 200000;
    double lo = 1e-6, hi = 1.0 - 1e-6;
    auto trapezoid = [&](double a, double b) {
        double h = (b - a) / n, s = 0.0;
        for (int i = 0; i <= n; ++i) {
            double x = a + h * i;
            double f = pdf_dalog(x, 0.25, 2.0);
            s += (i == 0 || i == n) ? 0.5 * f : f;
        }
        return s * h;
    };
    CHECK(trapezoid(lo, hi) == doctest::Approx(1.0).epsilon(1e-4));
    double a = 0.1, b = 0.6;
    CHECK(trapezoid(a, b) ==
          doctest::Approx(cdf_dalog(b, 0.25, 2.0) - cdf_dalog(a, 0.25, 2.0)).epsilon(1e-6));
}

TEST_CASE("pdf equals the central finite difference of the cdf") {
    const double h = 1e-6;
    for (double mu : {0.25, 0.6}) {
        for (double nu : {1.0, 3.0}) {
            for (int i = 1; i < 100; ++i) {
                double s = i / 100.0;
                if (s < 2 * h || s > 1.0 - 2 * h) continue;
                double fd = (cdf_dalog(s + h, mu, nu) - cdf_dalog(s - h, mu, nu)) / (2 * h);
                double f = pdf_dalog(s, mu, nu);
                CHECK(std::fabs(fd - f) / std::max(1e-12, std::fabs(f)) <= 1e-5);
            }
        }
    }
}

namespace {

ScheduleRegistry make_registry(ScheduleMode mode) {
    // 1 continuous + 2 categorical features
    return ScheduleRegistry::create(mode, {1, 0, 0});
}

}  // namespace

TEST_CASE("sigma_of_t maps the median to mu * sigma_max") {
    auto reg = make_registry(ScheduleMode::Single);
    // mu = 0.25, nu ~ 1: t = 0.5 -> sigma_norm = 0.25 -> 20 on the cont feature
    CHECK(reg.sigma_of_t(0.5, 0) == doctest::Approx(20.0).epsilon(1e-9));
    CHECK(reg.sigma_of_t(0.5, 1) == doctest::Approx(25.0).epsilon(1e-9));  // cat: 0.25*100
}

TEST_CASE("sigma_of_t clamps the timestep and stays near the bounds") {
    auto reg = make_registry(ScheduleMode::PerType);
    double s0 = reg.sigma_of_t(0.0, 0);
    CHECK(s0 >= 0.0);
    CHECK(s0 <= 1e-3 * 80.0);  // quantile(1e-5) is tiny for mu=0.25, nu~1
    double s1 = reg.sigma_of_t(1.0, 0);
    CHECK(s1 <= 80.0);
    CHECK(s1 >= 0.99 * 80.0);
}

TEST_CASE("sigma_of_t is nondecreasing in t on a dense grid, every mode") {
    for (auto mode : {ScheduleMode::Single, ScheduleMode::PerType, ScheduleMode::PerFeature}) {
        auto reg = make_registry(mode);
        for (int k = 0; k < reg.n_features(); ++k) {
            double prev = -1.0;
            for (int i = 0; i <= 10000; ++i) {
                double s = reg.sigma_of_t(static_cast<double>(i) / 10000.0, k);
                CHECK(s >= prev);
                prev = s;
            }
        }
    }
}

TEST_CASE("larger mu gives a uniformly larger schedule at equal nu") {
    auto a = ScheduleParams::init(0.2, 1.5, 1.0, 0.0, 80.0);
    auto b = ScheduleParams::init(0.45, 1.5, 1.0, 0.0, 80.0);
    for (int i = 1; i < 100; ++i) {
        double t = i / 100.0;
        CHECK(quantile_dalog(t, a.mu(), a.nu()) < quantile_dalog(t, b.mu(), b.nu()));
    }
}

TEST_CASE("unknown entity is rejected") {
    auto reg = make_registry(ScheduleMode::PerFeature);
    CHECK_THROWS_AS(reg.sigma_of_t(0.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(reg.sigma_of_t(0.5, -1), std::invalid_argument);
}

TEST_CASE("predict_loss scales the cdf by gamma") {
    auto p1 = ScheduleParams::init(0.25, 1.0 + 1e-9, 1.0, 0.0, 80.0);
    CHECK(p1.predict_loss(20.0) == doctest::Approx(0.5).epsilon(1e-6));  // sigma_norm = mu
    auto p2 = ScheduleParams::init(0.25, 1.0 + 1e-9, 2.0, 0.0, 80.0);
    CHECK(p2.predict_loss(20.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p1.predict_loss(40.0) == doctest::Approx(0.75).epsilon(1e-6));  // cdf example
    // strictly increasing in sigma
    double prev = -1.0;
    for (int i = 1; i < 80; ++i) {
        double v = p1.predict_loss(static_cast<double>(i));
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("fit recovers known generating parameters from noisy observations") {
    const double mu_true = 0.4, nu_true = 3.0, gamma_true = 1.5;
    Rng rng(17);
    std::vector<std::pair<double, double>> obs(5000);
    for (auto& [s, l] : obs) {
        s = 1e-4 + (1.0 - 2e-4) * rng.uniform();
        double clean = gamma_true * cdf_dalog(s, mu_true, nu_true);
        l = std::max(0.0, clean + 0.05 * rng.normal());
    }
    auto p = ScheduleParams::init(0.25, 1.01, 1.0, 0.0, 1.0);
    for (int step = 0; step < 5000; ++step) p.fit_step(obs, 0.01);
    CHECK(std::fabs(p.mu() - mu_true) <= 0.02);
    CHECK(std::fabs(p.nu() - nu_true) <= 0.3);
    CHECK(std::fabs(p.gamma() - gamma_true) <= 0.05);
}

TEST_CASE("fitting a constant loss drives gamma toward it") {
    const double c = 0.7;
    Rng rng(3);
    std::vector<std::pair<double, double>> obs(256);
    for (auto& [s, l] : obs) {
        s = 1e-3 + (1.0 - 2e-3) * rng.uniform();
        l = c;
    }
    auto p = ScheduleParams::init(0.25, 1.01, 1.0, 0.0, 1.0);
    auto residual = [&]() {
        double r = 0.0;
        for (auto& [s, l] : obs) {
            double e = l - p.predict_loss(s);
            double w = 1.0 / std::max(pdf_dalog(s, p.mu(), p.nu()), ScheduleParams::kWeightFloor);
            r += w * e * e;
        }
        return r / obs.size();
    };
    double prev = residual();
    double gamma_start = p.gamma();
    for (int step = 0; step < 100; ++step) {
        p.fit_step(obs, 0.01);
        double r = residual();
        CHECK(r <= prev + 1e-12);
        prev = r;
    }
    CHECK(std::fabs(p.gamma() - c) < std::fabs(gamma_start - c));
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
    std::vector<std::pair<double, double>> obs = {{0.3, 0.9}, {0.6, 1.2}};
    auto p = ScheduleParams::init(0.25, 1.01, 1.0, 0.0, 1.0);
    auto before = p;
    p.fit_step(obs, 0.0);
    CHECK(p.raw_mu == before.raw_mu);
    CHECK(p.raw_nu == before.raw_nu);
    CHECK(p.raw_gamma == before.raw_gamma);
}

TEST_CASE("NaN losses are rejected") {
    std::vector<std::pair<double, double>> obs = {{0.3, std::nan("")}};
    auto p = ScheduleParams::init(0.25, 1.01, 1.0, 0.0, 1.0);
    CHECK_THROWS_AS(p.fit_step(obs, 0.01), std::invalid_argument);
}

TEST_CASE("registry entry counts per mode") {
    CHECK(make_registry(ScheduleMode::Single).entries.size() == 1);
    CHECK(make_registry(ScheduleMode::PerType).entries.size() == 2);
    CHECK(make_registry(ScheduleMode::PerFeature).entries.size() == 3);
}

TEST_CASE("mu = 1/4 initialization puts 3x the mass below the midpoint noise level") {
    auto reg = make_registry(ScheduleMode::Single);
    const auto& e = reg.entries[0];
    // cdf(0.5) = 0.75 at mu = 1/4, nu = 1 (checked against the hand value;
    // the stored nu is 1 + 1e-2, so allow its tiny deviation)
    CHECK(cdf_dalog(0.5, e.mu(), 1.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(cdf_dalog(0.5, e.mu(), e.nu()) == doctest::Approx(0.75).epsilon(2e-2));
}
