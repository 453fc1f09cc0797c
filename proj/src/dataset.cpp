#include "cdtd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "cdtd/rng.hpp"

namespace cdtd {

Dataset encode_dataset(const RawTable& raw, const PreprocState& preproc) {
    Dataset ds;
    ds.schema = raw.schema;
    ds.n_rows = static_cast<int>(raw.rows.size());
    ds.cont.resize(preproc.cont.size());
    ds.cat.resize(preproc.cat.size());
    for (auto& c : ds.cont) c.reserve(raw.rows.size());
    for (auto& c : ds.cat) c.reserve(raw.rows.size());

    for (const auto& row : raw.rows) {
        for (int k = 0; k < raw.schema.n_features(); ++k) {
            int s = preproc.slot[k];
            if (raw.schema.is_continuous(k)) {
                ds.cont[s].push_back(preproc.cont[s].apply(std::strtod(row[k].c_str(), nullptr)));
            } else {
                ds.cat[s].push_back(preproc.cat[s].encode(row[k]));
            }
        }
    }
    return ds;
}

std::vector<std::string> decode_row(const std::vector<double>& cont_row,
                                    const std::vector<int>& cat_row,
                                    const PreprocState& preproc) {
    const auto& schema = preproc.schema;
    std::vector<std::string> out(schema.n_features());
    for (int k = 0; k < schema.n_features(); ++k) {
        int s = preproc.slot[k];
        if (schema.is_continuous(k)) {
            double v = preproc.cont[s].invert(cont_row[s]);
            char buf[64];
            if (schema.features[k].is_integer) {
                std::snprintf(buf, sizeof(buf), "%.0f", std::round(v));
            } else {
                std::snprintf(buf, sizeof(buf), "%.10g", v);
            }
            out[k] = buf;
        } else {
            out[k] = preproc.cat[s].decode(cat_row[s]);
        }
    }
    return out;
}

namespace {

// largest-remainder allocation of n slots over the fractions
std::array<int, 3> allocate(int n, const std::array<double, 3>& fractions) {
    std::array<int, 3> counts{};
    std::array<double, 3> rem{};
    int assigned = 0;
    for (int p = 0; p < 3; ++p) {
        double want = fractions[p] * n;
        counts[p] = static_cast<int>(want);
        rem[p] = want - counts[p];
        assigned += counts[p];
    }
    while (assigned < n) {
        int best = 0;
        for (int p = 1; p < 3; ++p)
            if (rem[p] > rem[best]) best = p;
        ++counts[best];
        rem[best] = -1.0;
        ++assigned;
    }
    return counts;
}

void shuffle(std::vector<int>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.uniform_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

SplitIndices split_indices(int n_rows, const std::array<double, 3>& fractions,
                           const std::vector<std::string>* stratify_labels, uint64_t seed) {
    if (n_rows < 10) throw std::invalid_argument("split: need at least 10 rows");
    double fsum = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(fsum - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");

    Rng rng(seed);
    SplitIndices out;

    if (!stratify_labels) {
        std::vector<int> idx(n_rows);
        for (int i = 0; i < n_rows; ++i) idx[i] = i;
        shuffle(idx, rng);
        auto counts = allocate(n_rows, fractions);
        out.train.assign(idx.begin(), idx.begin() + counts[0]);
        out.valid.assign(idx.begin() + counts[0], idx.begin() + counts[0] + counts[1]);
        out.test.assign(idx.begin() + counts[0] + counts[1], idx.end());
        return out;
    }

    if (static_cast<int>(stratify_labels->size()) != n_rows)
        throw std::invalid_argument("split: stratify labels do not match row count");

    // group rows per class in first-appearance order
    std::vector<std::string> classes;
    std::vector<std::vector<int>> groups;
    for (int i = 0; i < n_rows; ++i) {
        const auto& lab = (*stratify_labels)[i];
        size_t g = 0;
        for (; g < classes.size(); ++g)
            if (classes[g] == lab) break;
        if (g == classes.size()) {
            classes.push_back(lab);
            groups.emplace_back();
        }
        groups[g].push_back(i);
    }

    for (size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() < 3)
            throw std::invalid_argument("split: class '" + classes[g] +
                                        "' has fewer rows than partitions");
        shuffle(groups[g], rng);
        auto counts = allocate(static_cast<int>(groups[g].size()), fractions);
        auto it = groups[g].begin();
        out.train.insert(out.train.end(), it, it + counts[0]);
        it += counts[0];
        out.valid.insert(out.valid.end(), it, it + counts[1]);
        it += counts[1];
        out.test.insert(out.test.end(), it, groups[g].end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.valid.begin(), out.valid.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

RawTable subset(const RawTable& raw, const std::vector<int>& indices) {
    RawTable out;
    out.schema = raw.schema;
    out.rows.reserve(indices.size());
    for (int i : indices) out.rows.push_back(raw.rows[i]);
    return out;
}

Dataset subset(const Dataset& data, const std::vector<int>& indices) {
    Dataset out;
    out.schema = data.schema;
    out.n_rows = static_cast<int>(indices.size());
    out.cont.resize(data.cont.size());
    out.cat.resize(data.cat.size());
    for (size_t s = 0; s < data.cont.size(); ++s) {
        out.cont[s].reserve(indices.size());
        for (int i : indices) out.cont[s].push_back(data.cont[s][i]);
    }
    for (size_t s = 0; s < data.cat.size(); ++s) {
        out.cat[s].reserve(indices.size());
        for (int i : indices) out.cat[s].push_back(data.cat[s][i]);
    }
    return out;
}

}  // namespace cdtd
