#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdtd/dataset.hpp"
#include "cdtd/loss.hpp"
#include "cdtd/network.hpp"
#include "cdtd/preprocess.hpp"
#include "cdtd/schedule.hpp"

namespace cdtd {

// Everything a checkpoint carries. The diffused-feature view lists the
// generated features in canonical order (continuous first, then
// categorical, schema order within each type); a categorical target used
// for conditioning is excluded from the view and sampled from its training
// proportions instead.
struct Model {
    TableSchema schema;
    PreprocState preproc;
    NetworkConfig net_cfg;
    Network<float> net;        // live weights
    ParamSet<float> ema;       // shadow weights; sampling reads these
    ScheduleRegistry schedules;
    LossNormalizer normalizer;

    bool conditional = false;
    int target_feature = -1;                 // schema index when conditional
    std::vector<double> target_proportions;  // training class proportions

    std::vector<int> cont_slots;  // diffused cont i -> dataset cont slot
    std::vector<int> cat_slots;   // diffused cat j -> dataset cat slot

    int64_t trained_steps = 0;
    uint64_t seed = 0;
    double final_loss = 0.0, final_loss_cont = 0.0, final_loss_cat = 0.0;

    int k_cont() const { return static_cast<int>(cont_slots.size()); }
    int k_cat() const { return static_cast<int>(cat_slots.size()); }
    int k_features() const { return k_cont() + k_cat(); }
};

struct ModelOptions {
    ScheduleMode schedule_mode = ScheduleMode::PerType;
    int trunk_width = 796;
    int hidden_dim = 256;
    int embed_dim = 16;
    double sigma_max_cont = 80.0;
    double sigma_max_cat = 100.0;
    uint64_t seed = 0;
};

// Builds an initialized model: network weights drawn from the seed, the
// no-information head initialization from the training proportions,
// mu = 1/4 noise schedules, and a unit normalizer.
Model build_model(const PreprocState& preproc, const ModelOptions& options);

}  // namespace cdtd
