#include "cdtd/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "cdtd/csv.hpp"
#include "cdtd/mathx.hpp"
#include "cdtd/rng.hpp"

namespace cdtd {

void CopulaSpec::validate() const {
    schema.validate();
    const int K = schema.n_features();
    if (static_cast<int>(latent_corr.size()) != K)
        throw std::invalid_argument("copula: latent_corr must be K x K");
    for (const auto& row : latent_corr)
        if (static_cast<int>(row.size()) != K)
            throw std::invalid_argument("copula: latent_corr must be K x K");
    for (int k = 0; k < K; ++k) {
        if (std::fabs(latent_corr[k][k] - 1.0) > 1e-12)
            throw std::invalid_argument("copula: latent_corr diagonal must be 1");
        for (int j = 0; j < K; ++j)
            if (std::fabs(latent_corr[k][j] - latent_corr[j][k]) > 1e-12)
                throw std::invalid_argument("copula: latent_corr must be symmetric");
    }
    for (const auto& mix : mixtures) {
        if (mix.empty()) throw std::invalid_argument("copula: empty mixture");
        double wsum = 0.0;
        for (const auto& c : mix) {
            if (!(c.weight > 0.0) || !(c.std > 0.0))
                throw std::invalid_argument("copula: component weight and std must be > 0");
            wsum += c.weight;
        }
        if (std::fabs(wsum - 1.0) > 1e-9)
            throw std::invalid_argument("copula: mixture weights must sum to 1");
    }
    for (size_t s = 0; s < cat_probs.size(); ++s) {
        if (cat_probs[s].size() < 2)
            throw std::invalid_argument("copula: categorical feature needs >= 2 classes");
        if (cat_probs[s].size() != cat_labels[s].size())
            throw std::invalid_argument("copula: labels do not match probabilities");
        double psum = 0.0;
        for (double p : cat_probs[s]) {
            if (!(p > 0.0)) throw std::invalid_argument("copula: class probabilities must be > 0");
            psum += p;
        }
        if (std::fabs(psum - 1.0) > 1e-9)
            throw std::invalid_argument("copula: class probabilities must sum to 1");
    }
}

CopulaSpec CopulaSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("copula: invalid JSON: ") + e.what());
    }
    CopulaSpec spec;
    spec.schema.name = j.value("name", "synthetic");
    if (!j.contains("features") || !j["features"].is_array())
        throw std::invalid_argument("copula: missing 'features'");
    for (const auto& jf : j["features"]) {
        FeatureSpec f;
        f.name = jf.at("name").get<std::string>();
        std::string kind = jf.at("kind").get<std::string>();
        if (kind == "continuous") {
            f.kind = FeatureKind::Continuous;
            f.is_integer = jf.value("integer", false);
            spec.slot.push_back(static_cast<int>(spec.mixtures.size()));
            std::vector<Component> mix;
            for (const auto& jc : jf.at("components")) {
                Component c;
                c.weight = jc.value("weight", 1.0);
                c.mean = jc.value("mean", 0.0);
                c.std = jc.value("std", 1.0);
                mix.push_back(c);
            }
            spec.mixtures.push_back(mix);
        } else if (kind == "categorical") {
            f.kind = FeatureKind::Categorical;
            spec.slot.push_back(static_cast<int>(spec.cat_probs.size()));
            spec.cat_probs.push_back(jf.at("probs").get<std::vector<double>>());
            if (jf.contains("labels")) {
                spec.cat_labels.push_back(jf["labels"].get<std::vector<std::string>>());
            } else {
                std::vector<std::string> labels;
                for (size_t c = 0; c < spec.cat_probs.back().size(); ++c)
                    labels.push_back("c" + std::to_string(c));
                spec.cat_labels.push_back(labels);
            }
        } else {
            throw std::invalid_argument("copula: unknown kind '" + kind + "'");
        }
        spec.schema.features.push_back(f);
    }
    if (j.contains("target")) {
        std::string t = j["target"].get<std::string>();
        for (int k = 0; k < spec.schema.n_features(); ++k)
            if (spec.schema.features[k].name == t) spec.schema.target_index = k;
        if (!spec.schema.target_index)
            throw std::invalid_argument("copula: target is not a feature");
    }
    const int K = spec.schema.n_features();
    if (j.contains("latent_corr")) {
        spec.latent_corr = j["latent_corr"].get<std::vector<std::vector<double>>>();
    } else {
        spec.latent_corr.assign(K, std::vector<double>(K, 0.0));
        for (int k = 0; k < K; ++k) spec.latent_corr[k][k] = 1.0;
    }
    spec.validate();
    return spec;
}

CopulaSpec CopulaSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("copula spec not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

namespace {

// lower Cholesky factor; throws if the matrix is not positive definite
std::vector<std::vector<double>> cholesky(const std::vector<std::vector<double>>& A) {
    const int n = static_cast<int>(A.size());
    std::vector<std::vector<double>> L(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = A[i][j];
            for (int k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
            if (i == j) {
                if (s <= 0.0)
                    throw std::invalid_argument("copula: latent_corr is not positive definite");
                L[i][j] = std::sqrt(s);
            } else {
                L[i][j] = s / L[j][j];
            }
        }
    }
    return L;
}

double mixture_cdf(const std::vector<CopulaSpec::Component>& mix, double x) {
    double p = 0.0;
    for (const auto& c : mix) p += c.weight * norm_cdf((x - c.mean) / c.std);
    return p;
}

// quantile of a Gaussian mixture; a single component is exact and keeps
// the latent correlation intact for that feature
double mixture_quantile(const std::vector<CopulaSpec::Component>& mix, double u, double z) {
    if (mix.size() == 1) return mix[0].mean + mix[0].std * z;
    double lo = mix[0].mean, hi = mix[0].mean;
    for (const auto& c : mix) {
        lo = std::min(lo, c.mean - 10.0 * c.std);
        hi = std::max(hi, c.mean + 10.0 * c.std);
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mixture_cdf(mix, mid) < u)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

RawTable make_synthetic(const CopulaSpec& spec, int n_rows, uint64_t seed) {
    if (n_rows < 1) throw std::invalid_argument("copula: n must be >= 1");
    spec.validate();
    const int K = spec.schema.n_features();
    auto L = cholesky(spec.latent_corr);

    // per-categorical thresholds from cumulative probabilities
    std::vector<std::vector<double>> thresholds(spec.cat_probs.size());
    for (size_t s = 0; s < spec.cat_probs.size(); ++s) {
        double acc = 0.0;
        for (size_t c = 0; c + 1 < spec.cat_probs[s].size(); ++c) {
            acc += spec.cat_probs[s][c];
            thresholds[s].push_back(norm_ppf(acc));
        }
    }

    RawTable out;
    out.schema = spec.schema;
    out.rows.reserve(n_rows);

    Rng rng(seed);
    std::vector<double> eps(K), z(K);
    char buf[64];
    for (int r = 0; r < n_rows; ++r) {
        for (int k = 0; k < K; ++k) eps[k] = rng.normal();
        for (int k = 0; k < K; ++k) {
            double s = 0.0;
            for (int j = 0; j <= k; ++j) s += L[k][j] * eps[j];
            z[k] = s;
        }
        std::vector<std::string> row(K);
        for (int k = 0; k < K; ++k) {
            int s = spec.slot[k];
            if (spec.schema.is_continuous(k)) {
                double u = norm_cdf(z[k]);
                double x = mixture_quantile(spec.mixtures[s], u, z[k]);
                if (spec.schema.features[k].is_integer) {
                    std::snprintf(buf, sizeof(buf), "%.0f", std::round(x));
                } else {
                    std::snprintf(buf, sizeof(buf), "%.10g", x);
                }
                row[k] = buf;
            } else {
                const auto& th = thresholds[s];
                size_t c = 0;
                while (c < th.size() && z[k] >= th[c]) ++c;
                row[k] = spec.cat_labels[s][c];
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

void make_synthetic_csv(const CopulaSpec& spec, int n_rows, uint64_t seed,
                        const std::string& path) {
    RawTable t = make_synthetic(spec, n_rows, seed);
    std::vector<std::string> header;
    for (const auto& f : t.schema.features) header.push_back(f.name);
    write_csv(path, header, t.rows);
}

}  // namespace cdtd
