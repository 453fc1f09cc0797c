#include "cdtd/network.hpp"

#include <cmath>
#include <stdexcept>

namespace cdtd {

void NetworkConfig::validate() const {
    if (k_cont < 0 || k_cont + k_cat() < 1)
        throw std::invalid_argument("network: need at least one feature");
    for (int c : cardinalities)
        if (c < 2) throw std::invalid_argument("network: categorical cardinality must be >= 2");
    if (embed_dim < 1 || hidden_dim < 1 || trunk_width < 1 || time_freqs < 1)
        throw std::invalid_argument("network: widths must be >= 1");
    if (n_classes < 0) throw std::invalid_argument("network: bad class count");
}

template <typename T>
void ParamSet<T>::shape_like(const NetworkConfig& cfg) {
    const int kc = cfg.k_cat();
    cat_embed.resize(kc);
    cat_bias.resize(kc);
    head_cat_w.resize(kc);
    head_cat_b.resize(kc);
    for (int j = 0; j < kc; ++j) {
        cat_embed[j].resize(cfg.cardinalities[j], cfg.embed_dim);
        cat_bias[j].resize(1, cfg.embed_dim);
        head_cat_w[j].resize(cfg.trunk_width, cfg.cardinalities[j]);
        head_cat_b[j].resize(1, cfg.cardinalities[j]);
    }
    in_proj_w.resize(cfg.input_dim(), cfg.hidden_dim);
    in_proj_b.resize(1, cfg.hidden_dim);
    time_w.resize(cfg.time_feat_dim(), cfg.hidden_dim);
    time_b.resize(1, cfg.hidden_dim);
    if (cfg.n_classes > 0) y_embed.resize(cfg.n_classes, cfg.hidden_dim);
    for (int l = 0; l < kTrunkDepth; ++l) {
        trunk_w[l].resize(l == 0 ? cfg.hidden_dim : cfg.trunk_width, cfg.trunk_width);
        trunk_b[l].resize(1, cfg.trunk_width);
    }
    head_cont_w.resize(cfg.trunk_width, cfg.k_cont);
    head_cont_b.resize(1, cfg.k_cont);
}

template <typename T>
void ParamSet<T>::zero() {
    for (auto& [name, mat] : named()) mat->zero();
}

template <typename T>
std::vector<std::pair<std::string, Mat<T>*>> ParamSet<T>::named() {
    std::vector<std::pair<std::string, Mat<T>*>> out;
    for (size_t j = 0; j < cat_embed.size(); ++j) {
        out.emplace_back("cat_embed." + std::to_string(j), &cat_embed[j]);
        out.emplace_back("cat_bias." + std::to_string(j), &cat_bias[j]);
    }
    out.emplace_back("in_proj.w", &in_proj_w);
    out.emplace_back("in_proj.b", &in_proj_b);
    out.emplace_back("time.w", &time_w);
    out.emplace_back("time.b", &time_b);
    if (!y_embed.empty()) out.emplace_back("y_embed", &y_embed);
    for (int l = 0; l < kTrunkDepth; ++l) {
        out.emplace_back("trunk." + std::to_string(l) + ".w", &trunk_w[l]);
        out.emplace_back("trunk." + std::to_string(l) + ".b", &trunk_b[l]);
    }
    out.emplace_back("head_cont.w", &head_cont_w);
    out.emplace_back("head_cont.b", &head_cont_b);
    for (size_t j = 0; j < head_cat_w.size(); ++j) {
        out.emplace_back("head_cat." + std::to_string(j) + ".w", &head_cat_w[j]);
        out.emplace_back("head_cat." + std::to_string(j) + ".b", &head_cat_b[j]);
    }
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const Mat<T>*>> ParamSet<T>::named() const {
    auto mut = const_cast<ParamSet<T>*>(this)->named();
    std::vector<std::pair<std::string, const Mat<T>*>> out;
    out.reserve(mut.size());
    for (auto& [n, m] : mut) out.emplace_back(n, m);
    return out;
}

template <typename T>
void NetworkBatch<T>::init(const NetworkConfig& cfg, int batch) {
    B = batch;
    x_cont.resize(B, cfg.k_cont);
    x_cat_emb.resize(B, cfg.k_cat() * cfg.embed_dim);
    t.assign(B, 0.0);
    y.clear();
    sigma_cont.assign(static_cast<size_t>(B) * cfg.k_cont, 1.0);
    sigma_cat.assign(static_cast<size_t>(B) * cfg.k_cat(), 1.0);
    cat_codes.clear();

    out_cont.resize(B, cfg.k_cont);
    d_out_cont.resize(B, cfg.k_cont);
    out_cat.resize(cfg.k_cat());
    d_out_cat.resize(cfg.k_cat());
    for (int j = 0; j < cfg.k_cat(); ++j) {
        out_cat[j].resize(B, cfg.cardinalities[j]);
        d_out_cat[j].resize(B, cfg.cardinalities[j]);
    }

    time_feat.resize(B, cfg.time_feat_dim());
    in_vec.resize(B, cfg.input_dim());
    h0.resize(B, cfg.hidden_dim);
    for (int l = 0; l < kTrunkDepth; ++l) {
        z[l].resize(B, cfg.trunk_width);
        a[l].resize(B, cfg.trunk_width);
    }
    d_h0.resize(B, cfg.hidden_dim);
    d_in_vec.resize(B, cfg.input_dim());
    d_a_prev.resize(B, cfg.trunk_width);
    d_z.resize(B, cfg.trunk_width);
    recorded = false;
}

namespace {

template <typename T>
void uniform_init(Mat<T>& m, double bound, Rng& rng) {
    for (auto& x : m.v) x = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
}

}  // namespace

template <typename T>
void Network<T>::init(const NetworkConfig& config,
                      const std::vector<std::vector<double>>& cat_proportions, Rng& rng) {
    config.validate();
    if (static_cast<int>(cat_proportions.size()) != config.k_cat())
        throw std::invalid_argument("network: proportions do not match categorical features");
    cfg = config;
    p.shape_like(cfg);

    for (int j = 0; j < cfg.k_cat(); ++j) {
        if (static_cast<int>(cat_proportions[j].size()) != cfg.cardinalities[j])
            throw std::invalid_argument("network: proportions size mismatch");
        for (auto& x : p.cat_embed[j].v) x = static_cast<T>(rng.normal() * cfg.sigma_init);
        p.cat_bias[j].zero();
    }
    renormalize_embeddings();

    uniform_init(p.in_proj_w, 1.0 / std::sqrt(static_cast<double>(cfg.input_dim())), rng);
    uniform_init(p.in_proj_b, 1.0 / std::sqrt(static_cast<double>(cfg.input_dim())), rng);
    uniform_init(p.time_w, 1.0 / std::sqrt(static_cast<double>(cfg.time_feat_dim())), rng);
    uniform_init(p.time_b, 1.0 / std::sqrt(static_cast<double>(cfg.time_feat_dim())), rng);
    if (cfg.n_classes > 0)
        for (auto& x : p.y_embed.v) x = static_cast<T>(rng.normal());
    for (int l = 0; l < kTrunkDepth; ++l) {
        double fan_in = static_cast<double>(p.trunk_w[l].rows);
        uniform_init(p.trunk_w[l], 1.0 / std::sqrt(fan_in), rng);
        uniform_init(p.trunk_b[l], 1.0 / std::sqrt(fan_in), rng);
    }

    // no-information initialization: zero continuous head, categorical head
    // biases at training log-proportions
    p.head_cont_w.zero();
    p.head_cont_b.zero();
    for (int j = 0; j < cfg.k_cat(); ++j) {
        p.head_cat_w[j].zero();
        for (int c = 0; c < cfg.cardinalities[j]; ++c) {
            double pc = cat_proportions[j][c];
            if (!(pc > 0.0)) throw std::invalid_argument("network: zero class proportion");
            p.head_cat_b[j][0][c] = static_cast<T>(std::log(pc));
        }
    }
}

template <typename T>
void Network<T>::embed_row(int feature_j, int code, T* out_d) const {
    const auto& E = p.cat_embed[feature_j];
    if (code < 0 || code >= E.rows)
        throw std::out_of_range("network: category code out of range");
    const T* e = E[code];
    const T* b = p.cat_bias[feature_j][0];
    for (int i = 0; i < cfg.embed_dim; ++i) out_d[i] = e[i] + b[i];
}

template <typename T>
void Network<T>::time_features(double t, const NetworkConfig& cfg, T* out) {
    const double s = cfg.timestep_scale * t;
    const int F = cfg.time_freqs;
    for (int k = 0; k < F; ++k) {
        double freq = (F == 1) ? 1.0
                               : std::pow(cfg.time_freq_max,
                                          static_cast<double>(k) / static_cast<double>(F - 1));
        out[2 * k] = static_cast<T>(std::sin(s * freq));
        out[2 * k + 1] = static_cast<T>(std::cos(s * freq));
    }
}

template <typename T>
void Network<T>::forward(NetworkBatch<T>& batch) const {
    const int B = batch.B;
    const int d = cfg.embed_dim;
    const int kc = cfg.k_cont;
    const int kk = cfg.k_cat();

    // EDM input scaling
    for (int b = 0; b < B; ++b) {
        const T* xc = batch.x_cont[b];
        T* iv = batch.in_vec[b];
        for (int i = 0; i < kc; ++i) {
            double sg = batch.sigma_cont[static_cast<size_t>(b) * kc + i];
            iv[i] = xc[i] * static_cast<T>(1.0 / std::sqrt(sg * sg + 1.0));
        }
        const T* xe = batch.x_cat_emb[b];
        for (int j = 0; j < kk; ++j) {
            double sg = batch.sigma_cat[static_cast<size_t>(b) * kk + j];
            T cin = static_cast<T>(1.0 / std::sqrt(sg * sg + 1.0));
            for (int i = 0; i < d; ++i) iv[kc + j * d + i] = xe[j * d + i] * cin;
        }
    }

    bool shared_t = true;
    for (int b = 1; b < B; ++b)
        if (batch.t[b] != batch.t[0]) { shared_t = false; break; }
    if (shared_t && B > 0) {
        time_features(batch.t[0], cfg, batch.time_feat[0]);
        for (int b = 1; b < B; ++b)
            std::copy(batch.time_feat[0], batch.time_feat[0] + cfg.time_feat_dim(),
                      batch.time_feat[b]);
    } else {
        for (int b = 0; b < B; ++b) time_features(batch.t[b], cfg, batch.time_feat[b]);
    }

    matmul(batch.in_vec, p.in_proj_w, batch.h0);
    if (shared_t && B > 0) {
        // one row of time projection, broadcast
        Mat<T> one(1, cfg.time_feat_dim()), proj(1, cfg.hidden_dim);
        std::copy(batch.time_feat[0], batch.time_feat[0] + cfg.time_feat_dim(), one[0]);
        matmul(one, p.time_w, proj);
        for (int b = 0; b < B; ++b) {
            T* h = batch.h0[b];
            for (int n = 0; n < cfg.hidden_dim; ++n) h[n] += proj[0][n];
        }
    } else {
        matmul(batch.time_feat, p.time_w, batch.h0, true);
    }
    for (int b = 0; b < B; ++b) {
        T* h = batch.h0[b];
        const T* bp = p.in_proj_b[0];
        const T* bt = p.time_b[0];
        for (int n = 0; n < cfg.hidden_dim; ++n) h[n] += bp[n] + bt[n];
        if (!batch.y.empty()) {
            int yb = batch.y[b];
            if (yb < 0 || yb >= cfg.n_classes)
                throw std::out_of_range("network: class label out of range");
            const T* ye = p.y_embed[yb];
            for (int n = 0; n < cfg.hidden_dim; ++n) h[n] += ye[n];
        }
    }

    const Mat<T>* prev = &batch.h0;
    for (int l = 0; l < kTrunkDepth; ++l) {
        matmul(*prev, p.trunk_w[l], batch.z[l]);
        for (int b = 0; b < B; ++b) {
            T* zb = batch.z[l][b];
            T* ab = batch.a[l][b];
            const T* bias = p.trunk_b[l][0];
            for (int n = 0; n < cfg.trunk_width; ++n) {
                T v = zb[n] + bias[n];
                zb[n] = v;
                ab[n] = v > T(0) ? v : T(0);
            }
        }
        prev = &batch.a[l];
    }

    matmul(batch.a[kTrunkDepth - 1], p.head_cont_w, batch.out_cont);
    for (int b = 0; b < B; ++b) {
        T* o = batch.out_cont[b];
        const T* bias = p.head_cont_b[0];
        for (int n = 0; n < kc; ++n) o[n] += bias[n];
    }
    for (int j = 0; j < kk; ++j) {
        matmul(batch.a[kTrunkDepth - 1], p.head_cat_w[j], batch.out_cat[j]);
        for (int b = 0; b < B; ++b) {
            T* o = batch.out_cat[j][b];
            const T* bias = p.head_cat_b[j][0];
            for (int n = 0; n < cfg.cardinalities[j]; ++n) o[n] += bias[n];
        }
    }
    batch.recorded = true;
}

template <typename T>
void Network<T>::backward(NetworkBatch<T>& batch, ParamSet<T>& tape) const {
    if (!batch.recorded) throw std::logic_error("network: backward before forward");
    const int B = batch.B;
    const int d = cfg.embed_dim;
    const int kc = cfg.k_cont;
    const int kk = cfg.k_cat();

    // heads -> trunk output
    Mat<T>& d_a_last = batch.d_a_prev;
    d_a_last.zero();
    matmul_acc_weight_grad(batch.a[kTrunkDepth - 1], batch.d_out_cont, tape.head_cont_w);
    acc_bias_grad(batch.d_out_cont, tape.head_cont_b);
    matmul_acc_input_grad(batch.d_out_cont, p.head_cont_w, d_a_last);
    for (int j = 0; j < kk; ++j) {
        matmul_acc_weight_grad(batch.a[kTrunkDepth - 1], batch.d_out_cat[j], tape.head_cat_w[j]);
        acc_bias_grad(batch.d_out_cat[j], tape.head_cat_b[j]);
        matmul_acc_input_grad(batch.d_out_cat[j], p.head_cat_w[j], d_a_last);
    }

    // trunk, deepest layer first
    for (int l = kTrunkDepth - 1; l >= 0; --l) {
        Mat<T>& dz = batch.d_z;
        for (int b = 0; b < B; ++b) {
            const T* zb = batch.z[l][b];
            const T* da = d_a_last[b];
            T* dzb = dz[b];
            for (int n = 0; n < cfg.trunk_width; ++n) dzb[n] = zb[n] > T(0) ? da[n] : T(0);
        }
        const Mat<T>& input = (l == 0) ? batch.h0 : batch.a[l - 1];
        matmul_acc_weight_grad(input, dz, tape.trunk_w[l]);
        acc_bias_grad(dz, tape.trunk_b[l]);
        if (l == 0) {
            batch.d_h0.zero();
            matmul_acc_input_grad(dz, p.trunk_w[l], batch.d_h0);
        } else {
            d_a_last.zero();
            matmul_acc_input_grad(dz, p.trunk_w[l], d_a_last);
        }
    }

    // h0 fans out to the input projection, time projection and y embedding
    matmul_acc_weight_grad(batch.in_vec, batch.d_h0, tape.in_proj_w);
    acc_bias_grad(batch.d_h0, tape.in_proj_b);
    matmul_acc_weight_grad(batch.time_feat, batch.d_h0, tape.time_w);
    acc_bias_grad(batch.d_h0, tape.time_b);
    if (!batch.y.empty()) {
        for (int b = 0; b < B; ++b) {
            T* g = tape.y_embed[batch.y[b]];
            const T* dh = batch.d_h0[b];
            for (int n = 0; n < cfg.hidden_dim; ++n) g[n] += dh[n];
        }
    }
    batch.d_in_vec.zero();
    matmul_acc_input_grad(batch.d_h0, p.in_proj_w, batch.d_in_vec);

    // route input gradients into the embedding tables (training only; the
    // noisy embedding is clean embedding + noise, so the chain is identity
    // up to the c_in scale)
    if (!batch.cat_codes.empty()) {
        for (int b = 0; b < B; ++b) {
            const T* div = batch.d_in_vec[b];
            for (int j = 0; j < kk; ++j) {
                double sg = batch.sigma_cat[static_cast<size_t>(b) * kk + j];
                T cin = static_cast<T>(1.0 / std::sqrt(sg * sg + 1.0));
                int code = batch.cat_codes[static_cast<size_t>(b) * kk + j];
                T* ge = tape.cat_embed[j][code];
                T* gb = tape.cat_bias[j][0];
                for (int i = 0; i < d; ++i) {
                    T g = div[kc + j * d + i] * cin;
                    ge[i] += g;
                    gb[i] += g;
                }
            }
        }
    }
}

template <typename T>
void Network<T>::renormalize_embeddings() {
    for (auto& E : p.cat_embed) {
        for (int r = 0; r < E.rows; ++r) {
            T* row = E[r];
            double n2 = 0.0;
            for (int i = 0; i < E.cols; ++i) n2 += static_cast<double>(row[i]) * row[i];
            double inv = 1.0 / std::sqrt(n2);
            for (int i = 0; i < E.cols; ++i) row[i] = static_cast<T>(row[i] * inv);
        }
    }
}

template <typename T>
void AdamState<T>::update(ParamSet<T>& params, const ParamSet<T>& grads, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    auto pn = params.named();
    auto gn = grads.named();
    auto mn = m.named();
    auto vn = v.named();
    for (size_t i = 0; i < pn.size(); ++i) {
        Mat<T>& pm = *pn[i].second;
        const Mat<T>& gm = *gn[i].second;
        Mat<T>& mm = *mn[i].second;
        Mat<T>& vm = *vn[i].second;
        for (size_t k = 0; k < pm.size(); ++k) {
            double g = static_cast<double>(gm.v[k]);
            double m1 = beta1 * mm.v[k] + (1.0 - beta1) * g;
            double v1 = beta2 * vm.v[k] + (1.0 - beta2) * g * g;
            mm.v[k] = static_cast<T>(m1);
            vm.v[k] = static_cast<T>(v1);
            double upd = lr * (m1 / c1) / (std::sqrt(v1 / c2) + eps);
            if (upd != 0.0) pm.v[k] = static_cast<T>(pm.v[k] - upd);
        }
    }
}

template <typename T>
void ema_update(ParamSet<T>& shadow, const ParamSet<T>& live, double decay) {
    auto sn = shadow.named();
    auto ln = live.named();
    for (size_t i = 0; i < sn.size(); ++i) {
        Mat<T>& s = *sn[i].second;
        const Mat<T>& l = *ln[i].second;
        for (size_t k = 0; k < s.size(); ++k)
            s.v[k] = static_cast<T>(decay * s.v[k] + (1.0 - decay) * l.v[k]);
    }
}

template struct ParamSet<float>;
template struct ParamSet<double>;
template struct NetworkBatch<float>;
template struct NetworkBatch<double>;
template class Network<float>;
template class Network<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template void ema_update<float>(ParamSet<float>&, const ParamSet<float>&, double);
template void ema_update<double>(ParamSet<double>&, const ParamSet<double>&, double);

}  // namespace cdtd
