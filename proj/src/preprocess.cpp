#include "cdtd/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <unordered_map>

#include "cdtd/mathx.hpp"

namespace cdtd {

double ContinuousPreproc::apply(double value) const {
    const auto& kv = knot_values;
    const auto& kr = knot_ranks;
    double p;
    if (value <= kv.front()) {
        p = kr.front();
    } else if (value >= kv.back()) {
        p = kr.back();
    } else {
        auto it = std::upper_bound(kv.begin(), kv.end(), value);
        size_t hi = static_cast<size_t>(it - kv.begin());
        size_t lo = hi - 1;
        double w = (value - kv[lo]) / (kv[hi] - kv[lo]);
        p = kr[lo] + w * (kr[hi] - kr[lo]);
    }
    return (norm_ppf(p) - mean) / stdev;
}

double ContinuousPreproc::invert(double transformed) const {
    const auto& kv = knot_values;
    const auto& kr = knot_ranks;
    double p = norm_cdf(transformed * stdev + mean);
    if (p <= kr.front()) return kv.front();
    if (p >= kr.back()) return kv.back();
    auto it = std::upper_bound(kr.begin(), kr.end(), p);
    size_t hi = static_cast<size_t>(it - kr.begin());
    size_t lo = hi - 1;
    double w = (p - kr[lo]) / (kr[hi] - kr[lo]);
    return kv[lo] + w * (kv[hi] - kv[lo]);
}

int CategoricalPreproc::encode(const std::string& label) const {
    for (size_t c = 0; c < vocab.size(); ++c)
        if (vocab[c] == label) return static_cast<int>(c);
    throw std::runtime_error("preprocess: unknown category '" + label + "'");
}

const std::string& CategoricalPreproc::decode(int code) const {
    if (code < 0 || code >= cardinality())
        throw std::runtime_error("preprocess: category code " + std::to_string(code) +
                                 " out of range");
    return vocab[code];
}

ContinuousPreproc fit_continuous_column(const std::vector<double>& values, int max_knots) {
    const size_t n = values.size();
    if (n == 0) throw std::invalid_argument("preprocess: empty continuous column");

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());

    // distinct values with tie-averaged 1-based ranks
    std::vector<double> kv, kr;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
        double avg_rank = 0.5 * static_cast<double>((i + 1) + (j + 1));
        kv.push_back(sorted[i]);
        kr.push_back(avg_rank / static_cast<double>(n + 1));
        i = j + 1;
    }
    if (kv.size() < 2)
        throw std::invalid_argument("preprocess: constant continuous column");

    // cap the knot table, keeping endpoints and subsampling uniformly
    if (static_cast<int>(kv.size()) > max_knots) {
        std::vector<double> sv, sr;
        sv.reserve(max_knots);
        sr.reserve(max_knots);
        const size_t m = kv.size();
        for (int k = 0; k < max_knots; ++k) {
            size_t idx = static_cast<size_t>(
                std::llround(static_cast<double>(k) * static_cast<double>(m - 1) /
                             static_cast<double>(max_knots - 1)));
            sv.push_back(kv[idx]);
            sr.push_back(kr[idx]);
        }
        kv = std::move(sv);
        kr = std::move(sr);
    }

    ContinuousPreproc pp;
    pp.knot_values = std::move(kv);
    pp.knot_ranks = std::move(kr);
    pp.mean = 0.0;
    pp.stdev = 1.0;

    // standardize the Gaussianized training column
    double s = 0.0, s2 = 0.0;
    for (double v : values) {
        double g = pp.apply(v);
        s += g;
        s2 += g * g;
    }
    double m = s / static_cast<double>(n);
    double var = (n > 1) ? (s2 - s * s / static_cast<double>(n)) / static_cast<double>(n - 1)
                         : 0.0;
    if (var <= 0.0)
        throw std::invalid_argument("preprocess: zero variance after rank transform");
    pp.mean = m;
    pp.stdev = std::sqrt(var);
    return pp;
}

CategoricalPreproc fit_categorical_column(const std::vector<std::string>& labels) {
    if (labels.empty()) throw std::invalid_argument("preprocess: empty categorical column");

    CategoricalPreproc pp;
    std::unordered_map<std::string, int> counts;
    bool has_missing = false;
    for (const auto& s : labels) {
        if (s == kMissingToken) {
            has_missing = true;
            ++counts[s];
            continue;
        }
        auto it = counts.find(s);
        if (it == counts.end()) {
            pp.vocab.push_back(s);  // first-appearance order
            counts[s] = 1;
        } else {
            ++it->second;
        }
    }
    if (has_missing) pp.vocab.push_back(kMissingToken);
    if (pp.cardinality() < 2)
        throw std::invalid_argument("preprocess: categorical feature needs at least 2 categories");

    const double n = static_cast<double>(labels.size());
    pp.proportions.resize(pp.vocab.size());
    pp.entropy = 0.0;
    for (size_t c = 0; c < pp.vocab.size(); ++c) {
        double p = static_cast<double>(counts[pp.vocab[c]]) / n;
        pp.proportions[c] = p;
        pp.entropy -= p * std::log(p);
    }
    return pp;
}

PreprocState fit_preprocessing(const RawTable& train) {
    if (train.rows.empty()) throw std::invalid_argument("preprocess: no training rows");

    PreprocState st;
    st.schema = train.schema;
    st.slot.resize(train.schema.n_features());

    for (int k = 0; k < train.schema.n_features(); ++k) {
        if (train.schema.is_continuous(k)) {
            std::vector<double> col;
            col.reserve(train.rows.size());
            for (const auto& row : train.rows) col.push_back(std::strtod(row[k].c_str(), nullptr));
            st.slot[k] = static_cast<int>(st.cont.size());
            try {
                st.cont.push_back(fit_continuous_column(col));
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument(std::string(e.what()) + " ('" +
                                            train.schema.features[k].name + "')");
            }
        } else {
            std::vector<std::string> col;
            col.reserve(train.rows.size());
            for (const auto& row : train.rows) col.push_back(row[k]);
            st.slot[k] = static_cast<int>(st.cat.size());
            try {
                st.cat.push_back(fit_categorical_column(col));
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument(std::string(e.what()) + " ('" +
                                            train.schema.features[k].name + "')");
            }
        }
    }
    return st;
}

}  // namespace cdtd
