#include "cdtd/model.hpp"

#include <stdexcept>

namespace cdtd {

Model build_model(const PreprocState& preproc, const ModelOptions& options) {
    Model m;
    m.schema = preproc.schema;
    m.preproc = preproc;
    m.seed = options.seed;

    // conditioning: only a categorical target is conditioned on
    if (m.schema.target_index) {
        int tk = *m.schema.target_index;
        if (!m.schema.is_continuous(tk)) {
            m.conditional = true;
            m.target_feature = tk;
            m.target_proportions = preproc.cat_of(tk).proportions;
        }
    }

    for (int k = 0; k < m.schema.n_features(); ++k) {
        if (m.conditional && k == m.target_feature) continue;
        if (m.schema.is_continuous(k))
            m.cont_slots.push_back(preproc.slot[k]);
        else
            m.cat_slots.push_back(preproc.slot[k]);
    }
    if (m.k_features() < 1) throw std::invalid_argument("model: nothing to generate");

    m.net_cfg.k_cont = m.k_cont();
    m.net_cfg.embed_dim = options.embed_dim;
    m.net_cfg.hidden_dim = options.hidden_dim;
    m.net_cfg.trunk_width = options.trunk_width;
    m.net_cfg.n_classes =
        m.conditional ? preproc.cat_of(m.target_feature).cardinality() : 0;
    std::vector<std::vector<double>> proportions;
    for (int slot : m.cat_slots) {
        m.net_cfg.cardinalities.push_back(preproc.cat[slot].cardinality());
        proportions.push_back(preproc.cat[slot].proportions);
    }

    Rng master(options.seed);
    Rng rng_net = master.fork(1);
    Rng rng_norm = master.fork(2);
    m.net.init(m.net_cfg, proportions, rng_net);
    m.ema = m.net.p;  // shadow equals live at step 0
    m.normalizer.init(rng_norm);

    std::vector<uint8_t> is_cont(m.k_features(), 0);
    for (int i = 0; i < m.k_cont(); ++i) is_cont[i] = 1;
    m.schedules = ScheduleRegistry::create(options.schedule_mode, is_cont,
                                           options.sigma_max_cont, options.sigma_max_cat);
    return m;
}

}  // namespace cdtd
