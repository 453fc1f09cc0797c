#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"

#include "cdtd/metrics.hpp"
#include "cdtd/rng.hpp"
#include "cdtd/synthetic.hpp"
#include "helpers.hpp"

using namespace cdtd;
using namespace cdtd::metrics;
using cdtd::testing::desk_spec;

namespace {

MetricTable table_of(const RawTable& raw) { return MetricTable::from_raw(raw); }

MetricTable desk_table(int n, uint64_t seed) {
    return table_of(make_synthetic(desk_spec(), n, seed));
}

}  // namespace

TEST_CASE("jsd: identical, disjoint and the hand-computed mixture value") {
    std::vector<std::string> p = {"a", "a", "b", "b"};
    CHECK(jsd(p, p) == doctest::Approx(0.0));

    std::vector<std::string> q = {"c", "c", "d"};
    CHECK(jsd(p, q) == doctest::Approx(1.0));

    // p = (1,0), q = (0.5,0.5): m = (0.75,0.25), JSD = 0.311278 base 2
    std::vector<std::string> ones = {"a", "a"};
    std::vector<std::string> half = {"a", "b"};
    CHECK(jsd(ones, half) == doctest::Approx(0.311278).epsilon(1e-4));

    CHECK_THROWS_AS(jsd({}, p), std::invalid_argument);
}

TEST_CASE("wasserstein: sorted matching, translation, zero range error") {
    std::vector<double> a = {0.0, 2.0};
    std::vector<double> b = {1.0, 3.0};
    // matching cost (1+1)/2 = 1, real range 2 -> 0.5
    CHECK(wasserstein_1d(a, b) == doctest::Approx(0.5));
    CHECK(wasserstein_1d(a, a) == doctest::Approx(0.0));

    Rng rng(3);
    std::vector<double> real, shifted;
    for (int i = 0; i < 1000; ++i) {
        double v = rng.normal();
        real.push_back(v);
        shifted.push_back(v + 0.7);
    }
    double range = *std::max_element(real.begin(), real.end()) -
                   *std::min_element(real.begin(), real.end());
    CHECK(wasserstein_1d(real, shifted) == doctest::Approx(0.7 / range).epsilon(1e-9));

    std::vector<double> flat = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(wasserstein_1d(flat, a), std::invalid_argument);
}

TEST_CASE("wasserstein with unequal sizes matches an equal-size oracle") {
    Rng rng(9);
    std::vector<double> real, fake3;
    for (int i = 0; i < 600; ++i) real.push_back(rng.normal());
    for (int i = 0; i < 600; ++i) fake3.push_back(rng.normal() * 1.4 + 0.3);

    // oracle: equal sizes -> mean absolute difference of sorted samples
    auto r = real;
    auto f = fake3;
    std::sort(r.begin(), r.end());
    std::sort(f.begin(), f.end());
    double cost = 0.0;
    for (size_t i = 0; i < r.size(); ++i) cost += std::fabs(r[i] - f[i]);
    cost /= r.size();
    double range = r.back() - r.front();
    CHECK(wasserstein_1d(real, fake3) == doctest::Approx(cost / range).epsilon(1e-9));

    // thinning the fake sample to 1/3 size changes the value only by
    // sampling noise, not by an algorithmic break
    std::vector<double> fake_thin;
    for (size_t i = 0; i < fake3.size(); i += 3) fake_thin.push_back(fake3[i]);
    CHECK(wasserstein_1d(real, fake_thin) ==
          doctest::Approx(wasserstein_1d(real, fake3)).epsilon(0.15));
}

TEST_CASE("correlation matrix: identity on self, ranges, degenerate flag") {
    MetricTable t = desk_table(4000, 5);
    CHECK(corr_l2(t, t) == doctest::Approx(0.0));

    auto cm = correlation_matrix(t);
    CHECK(!cm.degenerate);
    const int K = t.schema.n_features();
    for (int a = 0; a < K; ++a) {
        CHECK(cm.matrix[a][a] == doctest::Approx(1.0));
        for (int b = 0; b < K; ++b) {
            if (t.schema.is_continuous(a) && t.schema.is_continuous(b)) {
                CHECK(cm.matrix[a][b] >= -1.0);
                CHECK(cm.matrix[a][b] <= 1.0);
            } else if (a != b) {
                CHECK(cm.matrix[a][b] >= 0.0);  // Theil's U and eta live in [0,1]
                CHECK(cm.matrix[a][b] <= 1.0);
            }
        }
    }
    // the strongly coupled latent pair shows up in Pearson
    CHECK(cm.matrix[0][1] == doctest::Approx(0.8).epsilon(0.05));
}

TEST_CASE("theil's U: independence goes to zero, determinism to one") {
    // two independent categorical columns at n = 1e5
    Rng rng(12);
    RawTable raw;
    raw.schema.name = "ind";
    raw.schema.features = {{"u", FeatureKind::Categorical, false},
                           {"v", FeatureKind::Categorical, false}};
    for (int i = 0; i < 100000; ++i) {
        std::string a = rng.uniform() < 0.5 ? "x" : "y";
        std::string b = rng.uniform() < 0.3 ? "p" : "q";
        raw.rows.push_back({a, b});
    }
    auto t = table_of(raw);
    auto cm = correlation_matrix(t);
    CHECK(cm.matrix[0][1] <= 0.01);
    CHECK(cm.matrix[1][0] <= 0.01);

    // one column a function of the other: U(det|src) = 1
    RawTable raw2;
    raw2.schema = raw.schema;
    for (int i = 0; i < 1000; ++i) {
        std::string a = (i % 3 == 0) ? "x" : (i % 3 == 1 ? "y" : "z");
        raw2.rows.push_back({a, a + "!"});
    }
    auto t2 = table_of(raw2);
    auto cm2 = correlation_matrix(t2);
    CHECK(cm2.matrix[0][1] == doctest::Approx(1.0));
    CHECK(cm2.matrix[1][0] == doctest::Approx(1.0));
}

TEST_CASE("dcr: zero on copies, unit offset geometry, blocked equals brute force") {
    MetricTable t = desk_table(500, 8);
    CHECK(dcr(t, t, 1) == doctest::Approx(0.0));

    // brute-force oracle on random tables, threaded path must match exactly
    MetricTable q = desk_table(500, 9);
    double d1 = dcr(t, q, 1);
    double d4 = dcr(t, q, 4);
    CHECK(d1 == d4);
    CHECK(d1 > 0.0);
}

TEST_CASE("dcr single-row geometry: standardized offset of one unit") {
    // train has two rows (needed for nonzero variance); query sits one
    // standardized unit away in the first coordinate from the closest row
    RawTable train;
    train.schema.name = "geo";
    train.schema.features = {{"x", FeatureKind::Continuous, false}};
    train.rows = {{"0"}, {"2"}};  // mean 1, population std 1
    RawTable query = train;
    query.rows = {{"1"}};  // standardized: 0; closest train row: |0 - (-1)| = 1
    CHECK(dcr(table_of(train), table_of(query), 1) == doctest::Approx(1.0));
}

TEST_CASE("detection: bootstrap fake is near chance, shifted fake is separable") {
    MetricTable big = desk_table(15000, 21);
    auto take = [&](int lo, int hi) {
        MetricTable out;
        out.schema = big.schema;
        out.slot = big.slot;
        out.n_rows = hi - lo;
        out.cont.resize(big.cont.size());
        out.cat.resize(big.cat.size());
        for (size_t s = 0; s < big.cont.size(); ++s)
            out.cont[s].assign(big.cont[s].begin() + lo, big.cont[s].begin() + hi);
        for (size_t s = 0; s < big.cat.size(); ++s)
            out.cat[s].assign(big.cat[s].begin() + lo, big.cat[s].begin() + hi);
        return out;
    };
    MetricTable rt = take(0, 2500), rv = take(2500, 3750), rte = take(3750, 5000);

    // bootstrap resample of the same distribution (fresh copula draws)
    MetricTable ft = take(5000, 7500), fv = take(7500, 8750), fte = take(8750, 10000);
    double acc = detection_score(rt, rv, rte, ft, fv, fte, 0);
    CHECK(acc <= 0.55);
    CHECK(acc >= 0.40);

    // shift one continuous feature by five standard deviations
    auto shift = [&](MetricTable t) {
        for (auto& v : t.cont[0]) v += 10.0;  // x0 std is 2
        return t;
    };
    double acc2 = detection_score(rt, rv, rte, shift(ft), shift(fv), shift(fte), 0);
    CHECK(acc2 >= 0.95);

    // per-split fake counts must match the real counts
    CHECK_THROWS_AS(detection_score(rt, rv, rte, fv, fv, fte, 0), std::invalid_argument);
}

TEST_CASE("detection permutation control sits at chance") {
    // both sides drawn from the same generator with disjoint seeds: the
    // labels carry no signal
    MetricTable a = desk_table(10000, 31);
    MetricTable b = desk_table(10000, 32);
    auto take = [&](const MetricTable& big, int lo, int hi) {
        MetricTable out;
        out.schema = big.schema;
        out.slot = big.slot;
        out.n_rows = hi - lo;
        out.cont.resize(big.cont.size());
        out.cat.resize(big.cat.size());
        for (size_t s = 0; s < big.cont.size(); ++s)
            out.cont[s].assign(big.cont[s].begin() + lo, big.cont[s].begin() + hi);
        for (size_t s = 0; s < big.cat.size(); ++s)
            out.cat[s].assign(big.cat[s].begin() + lo, big.cat[s].begin() + hi);
        return out;
    };
    double acc = detection_score(take(a, 0, 3000), take(a, 3000, 4500), take(a, 4500, 10000),
                                 take(b, 0, 3000), take(b, 3000, 4500), take(b, 4500, 10000), 0);
    CHECK(acc == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("ml efficiency: ridge on a linear model, identical and shuffled fakes") {
    // y = 2x + noise
    Rng rng(41);
    auto make = [&](int n) {
        RawTable raw;
        raw.schema.name = "lin";
        raw.schema.features = {{"x", FeatureKind::Continuous, false},
                               {"y", FeatureKind::Continuous, false}};
        raw.schema.target_index = 1;
        char buf[64];
        for (int i = 0; i < n; ++i) {
            double x = rng.normal();
            double y = 2.0 * x + 0.1 * rng.normal();
            std::vector<std::string> row(2);
            std::snprintf(buf, sizeof(buf), "%.8f", x);
            row[0] = buf;
            std::snprintf(buf, sizeof(buf), "%.8f", y);
            row[1] = buf;
            raw.rows.push_back(row);
        }
        return table_of(raw);
    };
    MetricTable real_train = make(2000), test = make(1000), fake = make(2000);

    auto perf_real = ml_efficiency_linear(real_train, test);
    auto perf_same = ml_efficiency_linear(real_train, test);
    CHECK(perf_real.rmse == doctest::Approx(perf_same.rmse));  // fake = real -> diff 0
    auto perf_fake = ml_efficiency_linear(fake, test);
    CHECK(std::fabs(perf_fake.rmse - perf_real.rmse) <= 0.05);

    // destroying the signal hurts
    MetricTable shuffled = real_train;
    Rng sr(5);
    for (size_t i = shuffled.cont[1].size(); i > 1; --i)
        std::swap(shuffled.cont[1][i - 1], shuffled.cont[1][sr.uniform_below(i)]);
    auto perf_shuf = ml_efficiency_linear(shuffled, test);
    CHECK(perf_shuf.rmse - perf_real.rmse > 0.5);
}

TEST_CASE("ml efficiency: logistic classification reports macro F1 and AUC") {
    CopulaSpec spec = desk_spec();
    spec.schema.target_index = 2;
    MetricTable train = table_of(make_synthetic(spec, 3000, 51));
    MetricTable test = table_of(make_synthetic(spec, 1500, 52));
    auto perf = ml_efficiency_linear(train, test);
    CHECK(perf.classification);
    // c0 is latently correlated with x0/x1, so a linear model beats chance
    CHECK(perf.auc > 0.6);
    CHECK(perf.macro_f1 > 0.5);

    MetricTable shuffled = train;
    Rng sr(6);
    for (size_t i = shuffled.cat[0].size(); i > 1; --i)
        std::swap(shuffled.cat[0][i - 1], shuffled.cat[0][sr.uniform_below(i)]);
    auto perf_shuf = ml_efficiency_linear(shuffled, test);
    CHECK(perf.auc - perf_shuf.auc > 0.05);
}

TEST_CASE("metric monotonicity smoke: distortions strictly raise the scores") {
    MetricTable real = desk_table(4000, 61);
    MetricTable same = desk_table(4000, 62);

    // near-zero baseline
    CHECK(jsd(real.cat[0], same.cat[0]) <= 0.01);
    CHECK(wasserstein_1d(real.cont[0], same.cont[0]) <= 0.02);
    CHECK(corr_l2(real, same) <= 0.15);

    // shift distortion
    MetricTable shifted = same;
    for (auto& v : shifted.cont[0]) v += 1.0;
    CHECK(wasserstein_1d(real.cont[0], shifted.cont[0]) >
          5.0 * wasserstein_1d(real.cont[0], same.cont[0]));

    // category swap distortion
    MetricTable swapped = same;
    for (auto& s : swapped.cat[0]) s = (s == "a") ? "b" : "a";
    CHECK(jsd(real.cat[0], swapped.cat[0]) > 5.0 * jsd(real.cat[0], same.cat[0]));

    // shuffling one column breaks the correlation structure
    MetricTable shuffled = same;
    Rng sr(7);
    for (size_t i = shuffled.cont[1].size(); i > 1; --i)
        std::swap(shuffled.cont[1][i - 1], shuffled.cont[1][sr.uniform_below(i)]);
    CHECK(corr_l2(real, shuffled) > 3.0 * corr_l2(real, same));
}

TEST_CASE("evaluate produces a complete report with per-feature arrays") {
    MetricTable train = desk_table(4000, 71);
    MetricTable test = desk_table(1500, 72);
    MetricTable fake = desk_table(4000, 73);
    auto rep = evaluate(train, test, fake, 0, 2);
    CHECK(rep.jsd_per_feature.size() == 2);
    CHECK(rep.wd_per_feature.size() == 2);
    CHECK(rep.cat_features.size() == 2);
    CHECK(rep.cont_features.size() == 2);
    CHECK(rep.detection_accuracy_proxy >= 0.3);
    CHECK(rep.detection_accuracy_proxy <= 0.6);  // fake == real distribution
    CHECK(rep.dcr_gen > 0.0);
    CHECK(rep.dcr_abs_diff < 0.2);
    auto json = rep.to_json();
    CHECK(json.find("detection_accuracy_proxy") != std::string::npos);
    CHECK(json.find("jsd_log_base") != std::string::npos);
}
