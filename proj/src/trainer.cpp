#include "cdtd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>

namespace cdtd {

void TrainConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
    if (batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    if (!(lr >= 0.0)) throw std::invalid_argument("train: lr must be >= 0");
    if (warmup >= steps && steps > 1)
        throw std::invalid_argument("train: warmup must be < steps");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0))
        throw std::invalid_argument("train: ema decay must be in [0,1)");
}

Trainer::Trainer(Model& model, const Dataset& train_data, const TrainConfig& config)
    : model_(model), data_(train_data), cfg_(config), rng_(0) {
    cfg_.validate();
    if (data_.n_rows < 1) throw std::invalid_argument("train: empty dataset");
    if (cfg_.batch > data_.n_rows) cfg_.batch = data_.n_rows;

    adam_.shape_like(model_.net_cfg);
    tape_.shape_like(model_.net_cfg);
    batch_.init(model_.net_cfg, cfg_.batch);

    rng_ = Rng(cfg_.seed).fork(3);
    order_.resize(data_.n_rows);
    for (int i = 0; i < data_.n_rows; ++i) order_[i] = i;
    for (size_t i = order_.size(); i > 1; --i)
        std::swap(order_[i - 1], order_[rng_.uniform_below(i)]);

    if (model_.conditional) {
        int slot = model_.preproc.slot[model_.target_feature];
        target_codes_ = data_.cat[slot];
    }
    per_row_feature_loss_.assign(static_cast<size_t>(cfg_.batch) * model_.k_features(), 0.0);
}

int Trainer::feature_of(int diffused_k) const {
    int slot = diffused_k < model_.k_cont() ? model_.cont_slots[diffused_k]
                                            : model_.cat_slots[diffused_k - model_.k_cont()];
    bool want_cont = diffused_k < model_.k_cont();
    for (int k = 0; k < model_.schema.n_features(); ++k)
        if (model_.schema.is_continuous(k) == want_cont && model_.preproc.slot[k] == slot)
            return k;
    return 0;
}

double Trainer::lr_at(int64_t step) const {
    double warm = cfg_.warmup > 0
                      ? std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg_.warmup))
                      : 1.0;
    double decay = 1.0;
    if (step > cfg_.warmup && cfg_.steps > cfg_.warmup)
        decay = 1.0 - static_cast<double>(step - cfg_.warmup) /
                          static_cast<double>(cfg_.steps - cfg_.warmup);
    return cfg_.lr * warm * std::max(0.0, decay);
}

std::vector<int> Trainer::next_rows() {
    std::vector<int> rows(cfg_.batch);
    for (int b = 0; b < cfg_.batch; ++b) {
        if (cursor_ >= order_.size()) {
            for (size_t i = order_.size(); i > 1; --i)
                std::swap(order_[i - 1], order_[rng_.uniform_below(i)]);
            cursor_ = 0;
        }
        rows[b] = order_[cursor_++];
    }
    return rows;
}

void Trainer::fill_batch(const std::vector<int>& rows, const std::vector<double>& t,
                         NetworkBatch<float>& batch, Rng& noise_rng,
                         const ParamSet<float>& params) {
    const int B = static_cast<int>(rows.size());
    const int kc = model_.k_cont();
    const int kk = model_.k_cat();
    const int d = model_.net_cfg.embed_dim;

    batch.t = t;
    batch.cat_codes.assign(static_cast<size_t>(B) * kk, 0);
    if (model_.conditional)
        batch.y.resize(B);
    else
        batch.y.clear();

    for (int b = 0; b < B; ++b) {
        int row = rows[b];
        for (int i = 0; i < kc; ++i) {
            double sg = model_.schedules.sigma_of_t(t[b], i);
            double x0 = data_.cont[model_.cont_slots[i]][row];
            batch.sigma_cont[static_cast<size_t>(b) * kc + i] = sg;
            batch.x_cont[b][i] = static_cast<float>(x0 + sg * noise_rng.normal());
        }
        for (int j = 0; j < kk; ++j) {
            double sg = model_.schedules.sigma_of_t(t[b], kc + j);
            int code = data_.cat[model_.cat_slots[j]][row];
            batch.sigma_cat[static_cast<size_t>(b) * kk + j] = sg;
            batch.cat_codes[static_cast<size_t>(b) * kk + j] = code;
            const float* e = params.cat_embed[j][code];
            const float* bias = params.cat_bias[j][0];
            float* x = batch.x_cat_emb[b] + j * d;
            for (int i = 0; i < d; ++i)
                x[i] = static_cast<float>(e[i] + bias[i] + sg * noise_rng.normal());
        }
        if (model_.conditional) batch.y[b] = target_codes_[row];
    }
}

StepMetrics Trainer::step() {
    const int B = cfg_.batch;
    const int kc = model_.k_cont();
    const int kk = model_.k_cat();
    const int K = kc + kk;

    std::vector<double> t = antithetic_timesteps(B, rng_);
    std::vector<int> rows = next_rows();
    fill_batch(rows, t, batch_, rng_, model_.net.p);
    model_.net.forward(batch_);

    StepMetrics metrics;
    metrics.per_feature.assign(K, 0.0);
    metrics.lr = lr_at(step_ + 1);

    std::vector<double> joint_per_row(B, 0.0);
    std::vector<double> z_pred(B, 1.0);
    for (int b = 0; b < B; ++b) z_pred[b] = model_.normalizer.predict(t[b]);

    std::vector<double> dce;
    for (int b = 0; b < B; ++b) {
        const double scale = 1.0 / (static_cast<double>(B) * K * z_pred[b]);
        double joint_b = 0.0;
        for (int i = 0; i < kc; ++i) {
            double sg = batch_.sigma_cont[static_cast<size_t>(b) * kc + i];
            double x0 = data_.cont[model_.cont_slots[i]][rows[b]];
            double xt = batch_.x_cont[b][i];
            double F = batch_.out_cont[b][i];
            double l = mse_loss_cont(x0, xt, F, sg);
            if (std::isnan(l))
                throw std::runtime_error("train: NaN loss in feature '" +
                                         model_.schema.features[feature_of(i)].name +
                                         "' at t=" + std::to_string(t[b]));
            joint_b += l;
            metrics.per_feature[i] += l;
            per_row_feature_loss_[static_cast<size_t>(b) * K + i] = l;
            batch_.d_out_cont[b][i] =
                static_cast<float>(d_mse_d_output(x0, xt, F, sg) * scale);
        }
        for (int j = 0; j < kk; ++j) {
            int code = batch_.cat_codes[static_cast<size_t>(b) * kk + j];
            double z_j =
                cfg_.uncalibrated_ce ? 1.0 : model_.preproc.cat[model_.cat_slots[j]].entropy;
            const int C = model_.net_cfg.cardinalities[j];
            std::span<const float> logits(batch_.out_cat[j][b], C);
            double l = ce_loss_cat(code, logits, z_j);
            if (std::isnan(l))
                throw std::runtime_error("train: NaN loss in feature '" +
                                         model_.schema.features[feature_of(kc + j)].name +
                                         "' at t=" + std::to_string(t[b]));
            joint_b += l;
            metrics.per_feature[kc + j] += l;
            per_row_feature_loss_[static_cast<size_t>(b) * K + kc + j] = l;
            dce.resize(C);
            d_ce_d_logits(code, logits, z_j, std::span<double>(dce));
            float* g = batch_.d_out_cat[j][b];
            for (int c = 0; c < C; ++c) g[c] = static_cast<float>(dce[c] * scale);
        }
        joint_per_row[b] = joint_b / K;
    }

    tape_.zero();
    model_.net.backward(batch_, tape_);
    if (metrics.lr > 0.0) {
        adam_.update(model_.net.p, tape_, metrics.lr);
        model_.net.renormalize_embeddings();
    }
    ema_update(model_.ema, model_.net.p, cfg_.ema_decay);

    // adaptive noise schedules fit the calibrated losses aggregated per
    // entity, after the score update (no gradient crosses the boundary)
    if (cfg_.fit_schedules) {
        std::vector<std::pair<double, double>> pairs(B);
        for (size_t e = 0; e < model_.schedules.entries.size(); ++e) {
            int count = 0;
            for (int k = 0; k < K; ++k)
                count += (model_.schedules.entry_of_feature[k] == static_cast<int>(e));
            if (count == 0) continue;
            int probe = 0;
            while (model_.schedules.entry_of_feature[probe] != static_cast<int>(e)) ++probe;
            for (int b = 0; b < B; ++b) {
                double sn = model_.schedules.sigma_norm_of_t(t[b], probe);
                double agg = 0.0;
                for (int k = 0; k < K; ++k) {
                    if (model_.schedules.entry_of_feature[k] != static_cast<int>(e)) continue;
                    agg += per_row_feature_loss_[static_cast<size_t>(b) * K + k];
                }
                pairs[b] = {sn, agg / count};
            }
            model_.schedules.entries[e].fit_step(pairs, cfg_.schedule_lr);
        }
    }

    if (cfg_.fit_normalizer) {
        std::vector<std::pair<double, double>> pairs(B);
        for (int b = 0; b < B; ++b) pairs[b] = {t[b], joint_per_row[b]};
        model_.normalizer.fit_step(pairs, metrics.lr);
    }

    for (int k = 0; k < K; ++k) metrics.per_feature[k] /= B;
    double sc = 0.0, sk = 0.0;
    for (int i = 0; i < kc; ++i) sc += metrics.per_feature[i];
    for (int j = 0; j < kk; ++j) sk += metrics.per_feature[kc + j];
    metrics.loss_cont = kc ? sc / kc : 0.0;
    metrics.loss_cat = kk ? sk / kk : 0.0;
    for (int b = 0; b < B; ++b) metrics.joint += joint_per_row[b];
    metrics.joint /= B;

    ++step_;
    return metrics;
}

void Trainer::run(const Dataset* valid_data) {
    std::deque<double> window;
    StepMetrics last;
    char line[256];
    while (step_ < cfg_.steps) {
        last = step();
        if (last.joint > cfg_.divergence_abort)
            throw std::runtime_error("train: loss diverged (" + std::to_string(last.joint) + ")");
        window.push_back(last.joint);
        if (window.size() > 100) window.pop_front();

        if (cfg_.log && (step_ % cfg_.log_every == 0 || step_ == cfg_.steps)) {
            std::snprintf(line, sizeof(line), "step=%lld loss=%.4f loss_cont=%.4f loss_cat=%.4f lr=%.6f",
                          static_cast<long long>(step_), last.joint, last.loss_cont,
                          last.loss_cat, last.lr);
            cfg_.log(line);
        }
        if (valid_data && cfg_.val_every > 0 &&
            (step_ % cfg_.val_every == 0 || step_ == cfg_.steps)) {
            double vl = eval_loss(*valid_data, model_.ema, -1.0,
                                  std::min<int>(cfg_.batch, valid_data->n_rows),
                                  cfg_.seed ^ (0x9e37ULL + static_cast<uint64_t>(step_)));
            if (cfg_.log) {
                std::snprintf(line, sizeof(line), "step=%lld val_loss=%.4f",
                              static_cast<long long>(step_), vl);
                cfg_.log(line);
            }
        }
    }
    model_.trained_steps = step_;
    model_.final_loss = 0.0;
    for (double v : window) model_.final_loss += v;
    if (!window.empty()) model_.final_loss /= static_cast<double>(window.size());
    model_.final_loss_cont = last.loss_cont;
    model_.final_loss_cat = last.loss_cat;
}

StepMetrics Trainer::eval_metrics(const Dataset& data, const ParamSet<float>& params,
                                  double t_fixed, int batch, uint64_t probe_seed) {
    const int kc = model_.k_cont();
    const int kk = model_.k_cat();
    const int K = kc + kk;

    Rng rng(probe_seed);
    std::vector<double> t;
    if (t_fixed >= 0.0)
        t.assign(batch, t_fixed);
    else
        t = antithetic_timesteps(batch, rng);

    std::vector<int> rows(batch);
    for (int b = 0; b < batch; ++b)
        rows[b] = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(data.n_rows)));

    NetworkBatch<float> nb;
    nb.init(model_.net_cfg, batch);

    // fill from the given dataset (mirrors fill_batch but without training state)
    const int d = model_.net_cfg.embed_dim;
    nb.t = t;
    nb.cat_codes.assign(static_cast<size_t>(batch) * kk, 0);
    if (model_.conditional) nb.y.resize(batch);
    int target_slot = model_.conditional ? model_.preproc.slot[model_.target_feature] : -1;
    for (int b = 0; b < batch; ++b) {
        int row = rows[b];
        for (int i = 0; i < kc; ++i) {
            double sg = model_.schedules.sigma_of_t(t[b], i);
            nb.sigma_cont[static_cast<size_t>(b) * kc + i] = sg;
            nb.x_cont[b][i] = static_cast<float>(data.cont[model_.cont_slots[i]][row] +
                                                 sg * rng.normal());
        }
        for (int j = 0; j < kk; ++j) {
            double sg = model_.schedules.sigma_of_t(t[b], kc + j);
            int code = data.cat[model_.cat_slots[j]][row];
            nb.sigma_cat[static_cast<size_t>(b) * kk + j] = sg;
            nb.cat_codes[static_cast<size_t>(b) * kk + j] = code;
            const float* e = params.cat_embed[j][code];
            const float* bias = params.cat_bias[j][0];
            float* x = nb.x_cat_emb[b] + j * d;
            for (int i = 0; i < d; ++i)
                x[i] = static_cast<float>(e[i] + bias[i] + sg * rng.normal());
        }
        if (model_.conditional) nb.y[b] = data.cat[target_slot][row];
    }

    Network<float> view;  // forward with the requested parameter set
    view.cfg = model_.net_cfg;
    view.p = params;
    view.forward(nb);

    StepMetrics out;
    out.per_feature.assign(K, 0.0);
    for (int b = 0; b < batch; ++b) {
        double joint_b = 0.0;
        for (int i = 0; i < kc; ++i) {
            double sg = nb.sigma_cont[static_cast<size_t>(b) * kc + i];
            double l = mse_loss_cont(data.cont[model_.cont_slots[i]][rows[b]],
                                     nb.x_cont[b][i], nb.out_cont[b][i], sg);
            joint_b += l;
            out.per_feature[i] += l;
        }
        for (int j = 0; j < kk; ++j) {
            int code = nb.cat_codes[static_cast<size_t>(b) * kk + j];
            const int C = model_.net_cfg.cardinalities[j];
            double l = ce_loss_cat(code, std::span<const float>(nb.out_cat[j][b], C),
                                   model_.preproc.cat[model_.cat_slots[j]].entropy);
            joint_b += l;
            out.per_feature[kc + j] += l;
        }
        out.joint += joint_b / K;
    }
    out.joint /= batch;
    for (auto& v : out.per_feature) v /= batch;
    double sc = 0.0, sk = 0.0;
    for (int i = 0; i < kc; ++i) sc += out.per_feature[i];
    for (int j = 0; j < kk; ++j) sk += out.per_feature[kc + j];
    out.loss_cont = kc ? sc / kc : 0.0;
    out.loss_cat = kk ? sk / kk : 0.0;
    return out;
}

void train_model(Model& model, const Dataset& train_data, const Dataset* valid_data,
                 const TrainConfig& config) {
    Trainer trainer(model, train_data, config);
    trainer.run(valid_data);
}

}  // namespace cdtd
