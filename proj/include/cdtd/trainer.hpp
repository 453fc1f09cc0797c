#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdtd/model.hpp"

namespace cdtd {

struct TrainConfig {
    int64_t steps = 30000;
    int batch = 4096;
    double lr = 0.001;
    int64_t warmup = 1000;       // linear warmup, then linear decay to 0
    double ema_decay = 0.999;
    uint64_t seed = 0;
    int64_t log_every = 100;
    int64_t val_every = 500;
    double schedule_lr = 0.01;   // decoupled schedule-fit optimizer
    bool fit_schedules = true;   // test knobs for the stop-gradient contracts
    bool fit_normalizer = true;
    bool uncalibrated_ce = false;  // test-only: drop the 1/Z_j scaling to
                                   // reproduce the unbalanced naive average
    double divergence_abort = 1e3;
    std::function<void(const std::string&)> log;  // optional line sink

    void validate() const;
};

struct StepMetrics {
    double joint = 0.0;  // mean calibrated joint loss (before time normalization)
    double loss_cont = 0.0;
    double loss_cat = 0.0;
    std::vector<double> per_feature;  // diffused-feature order
    double lr = 0.0;
};

class Trainer {
public:
    Trainer(Model& model, const Dataset& train_data, const TrainConfig& config);

    StepMetrics step();
    void run(const Dataset* valid_data = nullptr);

    double lr_at(int64_t step) const;  // linear warmup then linear decay
    int64_t current_step() const { return step_; }

    // calibrated losses on a dataset with given weights and a fixed noise
    // probe (used for validation and for the calibration checks);
    // t_fixed < 0 draws antithetic timesteps instead
    StepMetrics eval_metrics(const Dataset& data, const ParamSet<float>& params, double t_fixed,
                             int batch, uint64_t probe_seed);
    double eval_loss(const Dataset& data, const ParamSet<float>& params, double t_fixed,
                     int batch, uint64_t probe_seed) {
        return eval_metrics(data, params, t_fixed, batch, probe_seed).joint;
    }

private:
    void fill_batch(const std::vector<int>& rows, const std::vector<double>& t,
                    NetworkBatch<float>& batch, Rng& noise_rng, const ParamSet<float>& params);
    std::vector<int> next_rows();
    int feature_of(int diffused_k) const;  // diffused index -> schema feature index

    Model& model_;
    const Dataset& data_;
    TrainConfig cfg_;
    AdamState<float> adam_;
    ParamSet<float> tape_;
    NetworkBatch<float> batch_;
    Rng rng_;
    std::vector<int> order_;
    size_t cursor_ = 0;
    int64_t step_ = 0;
    std::vector<int> target_codes_;          // per train row, when conditional
    std::vector<double> per_row_feature_loss_;  // B x K scratch for schedule fitting
};

// Full pipeline used by the CLI: train with periodic validation, stamp the
// final losses into the model.
void train_model(Model& model, const Dataset& train_data, const Dataset* valid_data,
                 const TrainConfig& config);

}  // namespace cdtd
