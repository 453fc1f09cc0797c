#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "cdtd/sampler.hpp"
#include "cdtd/trainer.hpp"
#include "helpers.hpp"

using namespace cdtd;
using cdtd::testing::desk_spec;

namespace {

Model tiny_model(ScheduleMode mode, uint64_t seed = 0) {
    RawTable raw = make_synthetic(desk_spec(), 500, 42);
    auto prepared = cdtd::testing::prepare(raw);
    ModelOptions mo;
    mo.schedule_mode = mode;
    mo.trunk_width = 16;
    mo.hidden_dim = 32;
    mo.embed_dim = 8;
    mo.seed = seed;
    return build_model(prepared.preproc, mo);
}

}  // namespace

TEST_CASE("prior draws have the type-specific sigma_max scale") {
    Model m = tiny_model(ScheduleMode::PerType);
    const int n = 100000;
    std::vector<float> xc(m.k_cont());
    std::vector<float> xe(m.k_cat() * m.net_cfg.embed_dim);
    double s2 = 0.0, s2cat = 0.0;
    Rng base(7);
    for (int r = 0; r < n; ++r) {
        Rng row = base.fork(r);
        sample_prior_row(m, row, xc, xe, nullptr);
        s2 += static_cast<double>(xc[0]) * xc[0];
        s2cat += static_cast<double>(xe[0]) * xe[0];
    }
    CHECK(s2 / n == doctest::Approx(80.0 * 80.0).epsilon(0.02));
    CHECK(s2cat / n == doctest::Approx(100.0 * 100.0).epsilon(0.02));

    // fixed seed reproduces the prior
    Rng a(3), b(3);
    std::vector<float> xc1(m.k_cont()), xe1(xe.size()), xc2(m.k_cont()), xe2(xe.size());
    sample_prior_row(m, a, xc1, xe1, nullptr);
    sample_prior_row(m, b, xc2, xe2, nullptr);
    CHECK(xc1 == xc2);
    CHECK(xe1 == xe2);
}

TEST_CASE("categorical prior states have embed_dim dimensions per feature") {
    Model m = tiny_model(ScheduleMode::PerType);
    CHECK(m.net_cfg.embed_dim == 8);
    // the state vector is K_cat * d wide
    CHECK(m.k_cat() * m.net_cfg.embed_dim == 16);
}

TEST_CASE("categorical drift hand examples") {
    // e1 = (1,0), e2 = (-1,0), probs (0.75, 0.25), x_t = 0, sigma = 1
    double embeds[4] = {1.0, 0.0, -1.0, 0.0};
    std::vector<double> x_t = {0.0, 0.0};
    std::vector<double> probs = {0.75, 0.25};
    std::vector<double> drift(2);
    categorical_drift(x_t, probs, embeds, 2, 2, 1.0, drift);
    CHECK(drift[0] == doctest::Approx(-0.5));
    CHECK(drift[1] == doctest::Approx(0.0));

    // degenerate distribution recovers the embedding exactly
    probs = {1.0, 0.0};
    x_t = {0.3, -0.2};
    categorical_drift(x_t, probs, embeds, 2, 2, 2.0, drift);
    CHECK(drift[0] == doctest::Approx((0.3 - 1.0) / 2.0));
    CHECK(drift[1] == doctest::Approx(-0.1));

    // symmetric probabilities with opposite embeddings: xhat = 0
    probs = {0.5, 0.5};
    categorical_drift(x_t, probs, embeds, 2, 2, 0.5, drift);
    CHECK(drift[0] == doctest::Approx(0.6));
    CHECK(drift[1] == doctest::Approx(-0.4));

    CHECK_THROWS_AS(categorical_drift(x_t, probs, embeds, 2, 2, 0.0, drift),
                    std::domain_error);
    std::vector<double> bad = {0.9, 0.2};
    CHECK_THROWS_AS(categorical_drift(x_t, bad, embeds, 2, 2, 1.0, drift),
                    std::invalid_argument);
}

TEST_CASE("zero denoiser: one euler step scales by the sigma ratio") {
    Model m = tiny_model(ScheduleMode::PerType);
    const int kc = m.k_cont();
    const int kd = m.k_cat() * m.net_cfg.embed_dim;
    std::vector<float> xc = {1.5f, -2.0f};
    std::vector<float> xe(kd, 1.0f);
    std::vector<double> zc(kc, 0.0), ze(kd, 0.0);
    double t0 = 1.0, t1 = 0.995;
    euler_step_row<float>(xc, xe, zc, ze, m.schedules, m.net_cfg.embed_dim, t0, t1);
    double r_cont = m.schedules.sigma_of_t(t1, 0) / m.schedules.sigma_of_t(t0, 0);
    double r_cat = m.schedules.sigma_of_t(t1, kc) / m.schedules.sigma_of_t(t0, kc);
    CHECK(xc[0] == doctest::Approx(1.5 * r_cont).epsilon(1e-6));
    CHECK(xc[1] == doctest::Approx(-2.0 * r_cont).epsilon(1e-6));
    CHECK(xe[0] == doctest::Approx(r_cat).epsilon(1e-6));
}

TEST_CASE("zero denoiser telescopes to prior * sigma(tN)/sigma(t0) for all modes and N") {
    for (auto mode : {ScheduleMode::Single, ScheduleMode::PerType, ScheduleMode::PerFeature}) {
        Model m = tiny_model(mode);
        const int kc = m.k_cont();
        const int kd = m.k_cat() * m.net_cfg.embed_dim;
        for (int N : {1, 10, 200}) {
            std::vector<double> xc0 = {0.7, -1.3};
            std::vector<float> xc = {0.7f, -1.3f};
            std::vector<float> xe(kd);
            std::vector<double> xe0(kd);
            for (int i = 0; i < kd; ++i) {
                xe0[i] = 0.1 * (i + 1);
                xe[i] = static_cast<float>(xe0[i]);
            }
            // double-precision state through the production update rule
            std::vector<double> dc = xc0, de = xe0;
            std::vector<double> zc(kc, 0.0), ze(kd, 0.0);
            for (int s = 0; s < N; ++s) {
                double ts = 1.0 - static_cast<double>(s) / N;
                double tn = 1.0 - static_cast<double>(s + 1) / N;
                euler_step_row<double>(dc, de, zc, ze, m.schedules, m.net_cfg.embed_dim, ts, tn);
            }
            for (int i = 0; i < kc; ++i) {
                double expect = xc0[i] * m.schedules.sigma_of_t(0.0, i) /
                                m.schedules.sigma_of_t(1.0, i);
                CHECK(std::fabs(dc[i] - expect) <= 1e-6 * std::max(1e-12, std::fabs(expect)));
            }
            for (int j = 0; j < m.k_cat(); ++j) {
                size_t ix = static_cast<size_t>(j) * m.net_cfg.embed_dim;
                double expect = xe0[ix] * m.schedules.sigma_of_t(0.0, kc + j) /
                                m.schedules.sigma_of_t(1.0, kc + j);
                CHECK(std::fabs(de[ix] - expect) <= 1e-6 * std::max(1e-12, std::fabs(expect)));
            }
        }
    }
}

TEST_CASE("feature-specific steps differ when schedules differ") {
    Model m = tiny_model(ScheduleMode::PerFeature);
    // nudge the second feature's schedule away from the first
    m.schedules.entries[1].raw_mu += 1.0;
    double d0 = m.schedules.sigma_of_t(0.6, 0) - m.schedules.sigma_of_t(0.5, 0);
    double d1 = m.schedules.sigma_of_t(0.6, 1) - m.schedules.sigma_of_t(0.5, 1);
    CHECK(d0 != doctest::Approx(d1).epsilon(1e-6));
    // both still span min..max
    for (int k = 0; k < 2; ++k) {
        CHECK(m.schedules.sigma_of_t(0.0, k) < 0.1);
        CHECK(m.schedules.sigma_of_t(1.0, k) > 0.98 * 80.0);
    }
}

TEST_CASE("perfect constant denoiser pulls the state toward the target") {
    Model m = tiny_model(ScheduleMode::Single);
    const int kc = m.k_cont();
    const int kd = m.k_cat() * m.net_cfg.embed_dim;
    const double target = 0.42;
    std::vector<float> xc(kc, 30.0f), xe(kd, 0.0f);
    std::vector<double> tc(kc, target), te(kd, 0.0);
    const int N = 200;
    double prev_gap = std::fabs(30.0 - target);
    for (int s = 0; s < N; ++s) {
        double ts = 1.0 - static_cast<double>(s) / N;
        double tn = 1.0 - static_cast<double>(s + 1) / N;
        euler_step_row<float>(xc, xe, tc, te, m.schedules, m.net_cfg.embed_dim, ts, tn);
        double gap = std::fabs(xc[0] - target);
        CHECK(gap <= prev_gap + 1e-6);
        prev_gap = gap;
    }
    CHECK(std::fabs(xc[0] - target) < 0.05);
}

TEST_CASE("argmax commits to the most likely class, lowest code on ties") {
    std::vector<double> p1 = {0.9, 0.1};
    CHECK(argmax_lowest(p1) == 0);
    std::vector<double> p2 = {0.1, 0.9};
    CHECK(argmax_lowest(p2) == 1);
    std::vector<double> tie = {0.5, 0.5};
    CHECK(argmax_lowest(tie) == 0);
    std::vector<double> tie3 = {0.2, 0.4, 0.4};
    CHECK(argmax_lowest(tie3) == 1);
}

TEST_CASE("generate is deterministic, handles N = 1, and splits by row offset") {
    Model m = tiny_model(ScheduleMode::PerType, 3);
    SampleConfig cfg;
    cfg.n_rows = 40;
    cfg.steps = 8;
    cfg.seed = 21;
    cfg.threads = 1;
    auto a = generate(m, cfg);
    auto b = generate(m, cfg);
    CHECK(a == b);

    cfg.threads = 4;  // row-level streams make threading bit-stable
    auto c = generate(m, cfg);
    CHECK(a == c);

    SampleConfig one = cfg;
    one.steps = 1;
    auto d = generate(m, one);
    CHECK(d.size() == 40);
    for (const auto& row : d) CHECK(row.size() == 4);

    // 2n rows = concatenation of two n-row runs with offset streams
    SampleConfig full = cfg;
    full.n_rows = 40;
    SampleConfig lo = cfg, hi = cfg;
    lo.n_rows = 20;
    hi.n_rows = 20;
    hi.row_offset = 20;
    auto all = generate(m, full);
    auto first = generate(m, lo);
    auto second = generate(m, hi);
    first.insert(first.end(), second.begin(), second.end());
    CHECK(all == first);
}

TEST_CASE("conditional models sample the class label from training proportions") {
    CopulaSpec spec = desk_spec();
    spec.schema.target_index = 2;  // categorical feature c0
    RawTable raw = make_synthetic(spec, 2000, 4);
    auto prepared = cdtd::testing::prepare(raw);
    ModelOptions mo;
    mo.schedule_mode = ScheduleMode::PerType;
    mo.trunk_width = 16;
    mo.hidden_dim = 32;
    mo.embed_dim = 8;
    Model m = build_model(prepared.preproc, mo);
    CHECK(m.conditional);
    CHECK(m.k_features() == 3);  // target excluded from the diffused view

    SampleConfig cfg;
    cfg.n_rows = 4000;
    cfg.steps = 2;
    cfg.seed = 5;
    auto rows = generate(m, cfg);
    int count_a = 0;
    for (const auto& row : rows) count_a += (row[2] == "a");
    double prop = m.target_proportions[m.preproc.cat_of(2).encode("a")];
    CHECK(static_cast<double>(count_a) / 4000 == doctest::Approx(prop).epsilon(0.05));
}
