#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdtd/schema.hpp"
#include "cdtd/tensor.hpp"

namespace cdtd::metrics {

// Typed view of a raw table used by the metric suite: parsed continuous
// columns and categorical label columns.
struct MetricTable {
    TableSchema schema;
    std::vector<std::vector<double>> cont;       // [cont slot]
    std::vector<std::vector<std::string>> cat;   // [cat slot]
    std::vector<int> slot;                       // feature -> slot
    int n_rows = 0;

    static MetricTable from_raw(const RawTable& raw);
};

// Jensen-Shannon divergence (base 2, in [0,1]) between the empirical pmfs
// over the union vocabulary.
double jsd(const std::vector<std::string>& real, const std::vector<std::string>& fake);

// Order-1 empirical Wasserstein distance after min-max scaling both
// columns by the REAL column's range. Unequal sizes integrate the quantile
// functions over a merged grid.
double wasserstein_1d(const std::vector<double>& real, const std::vector<double>& fake);

// K x K association matrix: Pearson (cont-cont), Theil's U (cat-cat, both
// directed entries), correlation ratio eta (mixed), diagonal 1.
// Zero-variance columns give 0 entries and a flag.
struct CorrResult {
    Mat<double> matrix;
    bool degenerate = false;  // a zero-variance column was hit
};
CorrResult correlation_matrix(const MetricTable& table);
double corr_l2(const MetricTable& real, const MetricTable& fake);

// Distance to closest record: one-hot + standardization with TRAIN
// statistics, mean over query rows of the min Euclidean distance to any
// train row. threads > 1 splits query rows and matches the sequential
// scan exactly.
double dcr(const MetricTable& train, const MetricTable& query, int threads = 1);

// Detection proxy: L2-regularized logistic regression on one-hot +
// standardized features; the penalty comes from a fixed 5-point grid
// selected on the validation split. Returns test accuracy (0.5 = fake
// indistinguishable from real).
double detection_score(const MetricTable& real_train, const MetricTable& real_valid,
                       const MetricTable& real_test, const MetricTable& fake_train,
                       const MetricTable& fake_valid, const MetricTable& fake_test,
                       uint64_t seed);

struct EfficiencyResult {
    bool classification = false;
    double rmse = 0.0;      // regression
    double macro_f1 = 0.0;  // classification
    double auc = 0.0;
};
// Train-synthetic-test-real with linear models only: ridge for regression
// targets, logistic for categorical ones.
EfficiencyResult ml_efficiency_linear(const MetricTable& train, const MetricTable& test);

struct EvalReport {
    std::vector<std::string> cat_features, cont_features;
    std::vector<double> jsd_per_feature, wd_per_feature;
    double jsd_mean = 0.0, wd_mean = 0.0;
    double corr_l2 = 0.0;
    double dcr_gen = 0.0, dcr_test = 0.0, dcr_abs_diff = 0.0;
    double detection_accuracy_proxy = 0.0;
    std::optional<EfficiencyResult> eff_real, eff_fake;

    std::string to_json() const;
};

// Full evaluation protocol: JSD/WD/corr vs the real test table, DCR vs the
// training table, detection on train/valid/test splits carved from the
// provided real tables.
EvalReport evaluate(const MetricTable& real_train, const MetricTable& real_test,
                    const MetricTable& fake, uint64_t seed, int threads = 1);

}  // namespace cdtd::metrics
