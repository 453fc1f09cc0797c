#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "cdtd/rng.hpp"
#include "cdtd/tensor.hpp"

namespace cdtd {

inline constexpr int kTrunkDepth = 5;

struct NetworkConfig {
    int k_cont = 0;
    std::vector<int> cardinalities;  // per categorical feature
    int embed_dim = 16;
    int hidden_dim = 256;   // projection width
    int trunk_width = 796;
    int time_freqs = 64;    // sinusoidal dim = 2 * time_freqs
    double time_freq_max = 1000.0;
    double timestep_scale = 1000.0;
    double sigma_init = 0.001;
    int n_classes = 0;      // > 0 enables conditioning on a class label

    int k_cat() const { return static_cast<int>(cardinalities.size()); }
    int input_dim() const { return k_cont + k_cat() * embed_dim; }
    int time_feat_dim() const { return 2 * time_freqs; }
    void validate() const;
};

// All learnable tensors of the score network. Shared by the live weights,
// the EMA shadow, the gradient tape and the Adam moment buffers.
template <typename T>
struct ParamSet {
    std::vector<Mat<T>> cat_embed;  // C_j x d
    std::vector<Mat<T>> cat_bias;   // 1 x d
    Mat<T> in_proj_w, in_proj_b;
    Mat<T> time_w, time_b;
    Mat<T> y_embed;                 // n_classes x hidden (empty if unconditional)
    std::array<Mat<T>, kTrunkDepth> trunk_w, trunk_b;
    Mat<T> head_cont_w, head_cont_b;
    std::vector<Mat<T>> head_cat_w, head_cat_b;

    void shape_like(const NetworkConfig& cfg);
    void zero();
    std::vector<std::pair<std::string, Mat<T>*>> named();
    std::vector<std::pair<std::string, const Mat<T>*>> named() const;
};

// One forward/backward workspace. Inputs are noisy values; sigmas feed the
// EDM input scaling c_in = 1/sqrt(sigma^2 + 1).
template <typename T>
struct NetworkBatch {
    int B = 0;
    Mat<T> x_cont;                  // B x K_cont, noisy scalars
    Mat<T> x_cat_emb;               // B x (K_cat*d), noisy embeddings
    std::vector<double> t;          // per row
    std::vector<int> y;             // per row class label; empty if unconditional
    std::vector<double> sigma_cont; // B x K_cont, row-major
    std::vector<double> sigma_cat;  // B x K_cat
    std::vector<int> cat_codes;     // B x K_cat ground-truth codes; needed for backward

    // outputs
    Mat<T> out_cont;                      // B x K_cont
    std::vector<Mat<T>> out_cat;          // per feature: B x C_j (unnormalized logits)

    // gradients of the loss w.r.t. outputs, filled by the caller before backward
    Mat<T> d_out_cont;
    std::vector<Mat<T>> d_out_cat;

    void init(const NetworkConfig& cfg, int batch);

    // internal activations
    Mat<T> time_feat, in_vec, h0;
    std::array<Mat<T>, kTrunkDepth> z, a;
    Mat<T> d_h0, d_in_vec, d_a_prev, d_z;
    bool recorded = false;
};

template <typename T>
class Network {
public:
    NetworkConfig cfg;
    ParamSet<T> p;

    // cat_proportions: training proportions per categorical feature, used
    // to set the categorical head biases to log-proportions
    void init(const NetworkConfig& config,
              const std::vector<std::vector<double>>& cat_proportions, Rng& rng);

    // clean embedding of category `code` of feature j: stored row plus the
    // feature bias (rows are kept unit-norm by renormalize_embeddings)
    void embed_row(int feature_j, int code, T* out_d) const;

    void forward(NetworkBatch<T>& batch) const;

    // accumulates into the tape; requires a recorded forward on this batch
    void backward(NetworkBatch<T>& batch, ParamSet<T>& tape) const;

    // hard projection of every embedding row back to unit L2 norm; applied
    // after each optimizer step
    void renormalize_embeddings();

    // raw sinusoidal features of the scaled timestep (before the linear map)
    static void time_features(double t, const NetworkConfig& cfg, T* out);
};

template <typename T>
struct AdamState {
    ParamSet<T> m, v;
    int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void shape_like(const NetworkConfig& cfg) {
        m.shape_like(cfg);
        v.shape_like(cfg);
    }
    void update(ParamSet<T>& params, const ParamSet<T>& grads, double lr);
};

// shadow <- decay * shadow + (1 - decay) * live
template <typename T>
void ema_update(ParamSet<T>& shadow, const ParamSet<T>& live, double decay);

using NetworkF = Network<float>;
using NetworkD = Network<double>;

}  // namespace cdtd
