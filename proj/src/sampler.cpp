#include "cdtd/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "cdtd/csv.hpp"

namespace cdtd {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CDTD_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void sample_prior_row(const Model& model, Rng& row_rng, std::span<float> x_cont,
                      std::span<float> x_cat, int* y_out) {
    if (model.conditional && y_out) {
        double u = row_rng.uniform();
        double acc = 0.0;
        int cls = static_cast<int>(model.target_proportions.size()) - 1;
        for (size_t c = 0; c < model.target_proportions.size(); ++c) {
            acc += model.target_proportions[c];
            if (u < acc) {
                cls = static_cast<int>(c);
                break;
            }
        }
        *y_out = cls;
    }
    const int kc = model.k_cont();
    const int kk = model.k_cat();
    const int d = model.net_cfg.embed_dim;
    for (int i = 0; i < kc; ++i) {
        double smax = model.schedules.sigma_hi(i);
        x_cont[i] = static_cast<float>(smax * row_rng.normal());
    }
    for (int j = 0; j < kk; ++j) {
        double smax = model.schedules.sigma_hi(kc + j);
        for (int i = 0; i < d; ++i)
            x_cat[static_cast<size_t>(j) * d + i] = static_cast<float>(smax * row_rng.normal());
    }
}

void categorical_drift(std::span<const double> x_t, std::span<const double> probs,
                       const double* embeds, int n_classes, int dim, double sigma,
                       std::span<double> drift_out) {
    if (!(sigma > 0.0)) throw std::domain_error("categorical_drift: sigma must be > 0");
    double psum = 0.0;
    for (int c = 0; c < n_classes; ++c) psum += probs[c];
    if (std::fabs(psum - 1.0) > 1e-6)
        throw std::invalid_argument("categorical_drift: probabilities must sum to 1");
    for (int i = 0; i < dim; ++i) {
        double xhat = 0.0;
        for (int c = 0; c < n_classes; ++c) xhat += probs[c] * embeds[static_cast<size_t>(c) * dim + i];
        drift_out[i] = (x_t[i] - xhat) / sigma;
    }
}

int argmax_lowest(std::span<const double> probs) {
    int best = 0;
    for (size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = static_cast<int>(c);
    return best;
}

template <typename T>
void euler_step_row(std::span<T> x_cont, std::span<T> x_cat,
                    std::span<const double> xhat_cont, std::span<const double> xhat_cat,
                    const ScheduleRegistry& registry, int embed_dim, double t_s,
                    double t_next) {
    if (!(t_next < t_s)) throw std::invalid_argument("euler_step: times must decrease");
    const int K = registry.n_features();
    int cont_i = 0, cat_j = 0;
    for (int k = 0; k < K; ++k) {
        double sg = registry.sigma_of_t(t_s, k);
        double sg_next = registry.sigma_of_t(t_next, k);
        if (!(sg > 0.0)) throw std::runtime_error("euler_step: sigma is zero mid-trajectory");
        double scale = (sg_next - sg) / sg;
        if (registry.feature_is_cont[k]) {
            double x = x_cont[cont_i];
            x_cont[cont_i] = static_cast<T>(x + scale * (x - xhat_cont[cont_i]));
            ++cont_i;
        } else {
            for (int i = 0; i < embed_dim; ++i) {
                size_t idx = static_cast<size_t>(cat_j) * embed_dim + i;
                double x = x_cat[idx];
                x_cat[idx] = static_cast<T>(x + scale * (x - xhat_cat[idx]));
            }
            ++cat_j;
        }
    }
}

template void euler_step_row<float>(std::span<float>, std::span<float>,
                                    std::span<const double>, std::span<const double>,
                                    const ScheduleRegistry&, int, double, double);
template void euler_step_row<double>(std::span<double>, std::span<double>,
                                     std::span<const double>, std::span<const double>,
                                     const ScheduleRegistry&, int, double, double);

namespace {

// denoised targets for a block forward: EDM form for continuous features,
// probability-weighted embedding average for categorical ones
void denoised_targets(const Model& model, const ParamSet<float>& params,
                      NetworkBatch<float>& nb, int rows, std::vector<double>& xhat_cont,
                      std::vector<double>& xhat_cat, std::vector<double>& probs_scratch) {
    const int kc = model.k_cont();
    const int kk = model.k_cat();
    const int d = model.net_cfg.embed_dim;
    for (int b = 0; b < rows; ++b) {
        for (int i = 0; i < kc; ++i) {
            double sg = nb.sigma_cont[static_cast<size_t>(b) * kc + i];
            auto c = edm_coefficients(sg);
            xhat_cont[static_cast<size_t>(b) * kc + i] =
                c.c_skip * nb.x_cont[b][i] + c.c_out * nb.out_cont[b][i];
        }
        for (int j = 0; j < kk; ++j) {
            const int C = model.net_cfg.cardinalities[j];
            probs_scratch.resize(C);
            softmax(std::span<const float>(nb.out_cat[j][b], C),
                    std::span<double>(probs_scratch));
            const float* bias = params.cat_bias[j][0];
            for (int i = 0; i < d; ++i) {
                double xh = 0.0;
                for (int c = 0; c < C; ++c)
                    xh += probs_scratch[c] *
                          (static_cast<double>(params.cat_embed[j][c][i]) + bias[i]);
                xhat_cat[(static_cast<size_t>(b) * kk + j) * d + i] = xh;
            }
        }
    }
}

void sample_block(const Model& model, const Network<float>& view, const SampleConfig& cfg,
                  int64_t first_row, int rows, std::vector<std::vector<std::string>>& out) {
    const int kc = model.k_cont();
    const int kk = model.k_cat();
    const int d = model.net_cfg.embed_dim;
    const int N = cfg.steps;

    NetworkBatch<float> nb;
    nb.init(model.net_cfg, rows);
    if (model.conditional) nb.y.resize(rows);

    for (int b = 0; b < rows; ++b) {
        Rng row_rng = Rng(cfg.seed).fork(static_cast<uint64_t>(cfg.row_offset + first_row + b));
        sample_prior_row(model, row_rng, std::span<float>(nb.x_cont[b], kc),
                         std::span<float>(nb.x_cat_emb[b], static_cast<size_t>(kk) * d),
                         model.conditional ? &nb.y[b] : nullptr);
    }

    std::vector<double> xhat_cont(static_cast<size_t>(rows) * kc);
    std::vector<double> xhat_cat(static_cast<size_t>(rows) * kk * d);
    std::vector<double> probs;

    auto set_sigmas_and_t = [&](double t) {
        for (int b = 0; b < rows; ++b) nb.t[b] = t;
        for (int i = 0; i < kc; ++i) {
            double sg = model.schedules.sigma_of_t(t, i);
            for (int b = 0; b < rows; ++b) nb.sigma_cont[static_cast<size_t>(b) * kc + i] = sg;
        }
        for (int j = 0; j < kk; ++j) {
            double sg = model.schedules.sigma_of_t(t, kc + j);
            for (int b = 0; b < rows; ++b) nb.sigma_cat[static_cast<size_t>(b) * kk + j] = sg;
        }
    };

    for (int s = 0; s < N; ++s) {
        double t_s = 1.0 - static_cast<double>(s) / N;
        double t_next = 1.0 - static_cast<double>(s + 1) / N;
        set_sigmas_and_t(t_s);
        view.forward(nb);
        denoised_targets(model, view.p, nb, rows, xhat_cont, xhat_cat, probs);
        for (int b = 0; b < rows; ++b) {
            euler_step_row(std::span<float>(nb.x_cont[b], kc),
                           std::span<float>(nb.x_cat_emb[b], static_cast<size_t>(kk) * d),
                           std::span<const double>(xhat_cont.data() + static_cast<size_t>(b) * kc, kc),
                           std::span<const double>(xhat_cat.data() + static_cast<size_t>(b) * kk * d,
                                                   static_cast<size_t>(kk) * d),
                           model.schedules, d, t_s, t_next);
        }
    }

    // final pass at the clamped terminal time: categorical features commit
    // by argmax, continuous values come straight from the ODE state
    double t_final = std::max(0.0, ScheduleRegistry::kTimeClamp);
    set_sigmas_and_t(t_final);
    view.forward(nb);

    std::vector<double> cont_row(model.preproc.cont.size());
    std::vector<int> cat_row(model.preproc.cat.size());
    for (int b = 0; b < rows; ++b) {
        for (int i = 0; i < kc; ++i) cont_row[model.cont_slots[i]] = nb.x_cont[b][i];
        for (int j = 0; j < kk; ++j) {
            const int C = model.net_cfg.cardinalities[j];
            probs.resize(C);
            softmax(std::span<const float>(nb.out_cat[j][b], C), std::span<double>(probs));
            cat_row[model.cat_slots[j]] = argmax_lowest(probs);
        }
        if (model.conditional)
            cat_row[model.preproc.slot[model.target_feature]] = nb.y[b];
        out[first_row + b] = decode_row(cont_row, cat_row, model.preproc);
    }
}

}  // namespace

std::vector<std::vector<std::string>> generate(const Model& model, const SampleConfig& cfg) {
    if (cfg.n_rows < 1) throw std::invalid_argument("sample: n must be >= 1");
    if (cfg.steps < 1) throw std::invalid_argument("sample: steps must be >= 1");

    Network<float> view;
    view.cfg = model.net_cfg;
    view.p = model.ema;  // sampling always reads the EMA shadow

    std::vector<std::vector<std::string>> out(cfg.n_rows);
    const int block = 256;
    int n_blocks = (cfg.n_rows + block - 1) / block;
    int threads = std::min(resolve_threads(cfg.threads), n_blocks);

    if (threads <= 1) {
        for (int blk = 0; blk < n_blocks; ++blk) {
            int64_t first = static_cast<int64_t>(blk) * block;
            int rows = std::min<int>(block, cfg.n_rows - static_cast<int>(first));
            sample_block(model, view, cfg, first, rows, out);
        }
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next_blk{0};
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&]() {
                while (true) {
                    int blk = next_blk.fetch_add(1);
                    if (blk >= n_blocks) break;
                    int64_t first = static_cast<int64_t>(blk) * block;
                    int rows = std::min<int>(block, cfg.n_rows - static_cast<int>(first));
                    sample_block(model, view, cfg, first, rows, out);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

void generate_to_csv(const Model& model, const SampleConfig& cfg, const std::string& path) {
    auto rows = generate(model, cfg);
    std::vector<std::string> header;
    for (const auto& f : model.schema.features) header.push_back(f.name);
    write_csv(path, header, rows);
}

}  // namespace cdtd
