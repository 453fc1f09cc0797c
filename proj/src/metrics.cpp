#include "cdtd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "cdtd/rng.hpp"

namespace cdtd::metrics {

MetricTable MetricTable::from_raw(const RawTable& raw) {
    MetricTable t;
    t.schema = raw.schema;
    t.n_rows = static_cast<int>(raw.rows.size());
    t.slot.resize(raw.schema.n_features());
    for (int k = 0; k < raw.schema.n_features(); ++k) {
        if (raw.schema.is_continuous(k)) {
            t.slot[k] = static_cast<int>(t.cont.size());
            t.cont.emplace_back();
            t.cont.back().reserve(t.n_rows);
        } else {
            t.slot[k] = static_cast<int>(t.cat.size());
            t.cat.emplace_back();
            t.cat.back().reserve(t.n_rows);
        }
    }
    for (const auto& row : raw.rows) {
        for (int k = 0; k < raw.schema.n_features(); ++k) {
            if (raw.schema.is_continuous(k))
                t.cont[t.slot[k]].push_back(std::strtod(row[k].c_str(), nullptr));
            else
                t.cat[t.slot[k]].push_back(row[k]);
        }
    }
    return t;
}

double jsd(const std::vector<std::string>& real, const std::vector<std::string>& fake) {
    if (real.empty() || fake.empty()) throw std::invalid_argument("jsd: empty column");
    std::map<std::string, std::pair<double, double>> counts;
    for (const auto& s : real) counts[s].first += 1.0;
    for (const auto& s : fake) counts[s].second += 1.0;
    const double nr = static_cast<double>(real.size());
    const double nf = static_cast<double>(fake.size());
    double div = 0.0;
    for (const auto& [label, c] : counts) {
        double p = c.first / nr;
        double q = c.second / nf;
        double m = 0.5 * (p + q);
        if (p > 0.0) div += 0.5 * p * std::log2(p / m);
        if (q > 0.0) div += 0.5 * q * std::log2(q / m);
    }
    return div;
}

double wasserstein_1d(const std::vector<double>& real, const std::vector<double>& fake) {
    if (real.empty() || fake.empty()) throw std::invalid_argument("wasserstein: empty column");
    auto r = real;
    auto f = fake;
    std::sort(r.begin(), r.end());
    std::sort(f.begin(), f.end());
    const double range = r.back() - r.front();
    if (!(range > 0.0)) throw std::invalid_argument("wasserstein: real column has zero range");

    // integrate |Q_real(u) - Q_fake(u)| over the merged quantile grid
    const size_t n = r.size(), m = f.size();
    double w = 0.0;
    double u_prev = 0.0;
    size_t i = 0, j = 0;  // next breakpoints at (i+1)/n and (j+1)/m
    while (i < n && j < m) {
        double u_i = static_cast<double>(i + 1) / n;
        double u_j = static_cast<double>(j + 1) / m;
        double u = std::min(u_i, u_j);
        w += std::fabs(r[i] - f[j]) * (u - u_prev);
        u_prev = u;
        if (u_i <= u) ++i;
        if (u_j <= u) ++j;
    }
    return w / range;
}

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y, bool& degenerate) {
    const size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        degenerate = true;
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<int> codes_of(const std::vector<std::string>& col,
                          std::vector<std::string>& vocab) {
    std::map<std::string, int> index;
    std::vector<int> out(col.size());
    for (size_t i = 0; i < col.size(); ++i) {
        auto it = index.find(col[i]);
        if (it == index.end()) {
            it = index.emplace(col[i], static_cast<int>(vocab.size())).first;
            vocab.push_back(col[i]);
        }
        out[i] = it->second;
    }
    return out;
}

// U(x|y) = (H(x) - H(x|y)) / H(x)
double theils_u(const std::vector<std::string>& x, const std::vector<std::string>& y,
                bool& degenerate) {
    std::vector<std::string> vx, vy;
    auto cx = codes_of(x, vx);
    auto cy = codes_of(y, vy);
    const size_t n = x.size();
    const int Cx = static_cast<int>(vx.size());
    const int Cy = static_cast<int>(vy.size());

    std::vector<double> px(Cx, 0.0), py(Cy, 0.0);
    std::vector<double> joint(static_cast<size_t>(Cx) * Cy, 0.0);
    for (size_t i = 0; i < n; ++i) {
        px[cx[i]] += 1.0;
        py[cy[i]] += 1.0;
        joint[static_cast<size_t>(cx[i]) * Cy + cy[i]] += 1.0;
    }
    double hx = 0.0;
    for (int a = 0; a < Cx; ++a) {
        px[a] /= n;
        if (px[a] > 0) hx -= px[a] * std::log(px[a]);
    }
    if (hx <= 0.0) {
        degenerate = true;
        return 0.0;
    }
    double hxy = 0.0;  // H(x|y)
    for (int b = 0; b < Cy; ++b) {
        py[b] /= n;
        if (py[b] <= 0) continue;
        double h = 0.0;
        for (int a = 0; a < Cx; ++a) {
            double pab = joint[static_cast<size_t>(a) * Cy + b] / n;
            if (pab > 0) h -= (pab / py[b]) * std::log(pab / py[b]);
        }
        hxy += py[b] * h;
    }
    return (hx - hxy) / hx;
}

// correlation ratio between a categorical x and continuous y
double correlation_ratio(const std::vector<std::string>& x, const std::vector<double>& y,
                         bool& degenerate) {
    std::vector<std::string> vx;
    auto cx = codes_of(x, vx);
    const size_t n = x.size();
    const int C = static_cast<int>(vx.size());
    std::vector<double> sum(C, 0.0), cnt(C, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sum[cx[i]] += y[i];
        cnt[cx[i]] += 1.0;
        total += y[i];
    }
    double mean = total / n;
    double ss_between = 0.0, ss_total = 0.0;
    for (int c = 0; c < C; ++c) {
        if (cnt[c] > 0) {
            double mc = sum[c] / cnt[c];
            ss_between += cnt[c] * (mc - mean) * (mc - mean);
        }
    }
    for (size_t i = 0; i < n; ++i) ss_total += (y[i] - mean) * (y[i] - mean);
    if (ss_total <= 0.0) {
        degenerate = true;
        return 0.0;
    }
    return std::sqrt(ss_between / ss_total);
}

}  // namespace

CorrResult correlation_matrix(const MetricTable& t) {
    if (t.n_rows < 2) throw std::invalid_argument("correlation_matrix: need at least 2 rows");
    const int K = t.schema.n_features();
    CorrResult res;
    res.matrix.resize(K, K);
    for (int a = 0; a < K; ++a) {
        res.matrix[a][a] = 1.0;
        for (int b = 0; b < K; ++b) {
            if (a == b) continue;
            bool ca = t.schema.is_continuous(a);
            bool cb = t.schema.is_continuous(b);
            if (ca && cb) {
                if (b < a) continue;  // symmetric, fill once
                double r = pearson(t.cont[t.slot[a]], t.cont[t.slot[b]], res.degenerate);
                res.matrix[a][b] = r;
                res.matrix[b][a] = r;
            } else if (!ca && !cb) {
                res.matrix[a][b] = theils_u(t.cat[t.slot[a]], t.cat[t.slot[b]], res.degenerate);
            } else {
                if (b < a) continue;
                const auto& cat_col = ca ? t.cat[t.slot[b]] : t.cat[t.slot[a]];
                const auto& cont_col = ca ? t.cont[t.slot[a]] : t.cont[t.slot[b]];
                double eta = correlation_ratio(cat_col, cont_col, res.degenerate);
                res.matrix[a][b] = eta;
                res.matrix[b][a] = eta;
            }
        }
    }
    return res;
}

double corr_l2(const MetricTable& real, const MetricTable& fake) {
    auto mr = correlation_matrix(real);
    auto mf = correlation_matrix(fake);
    double s = 0.0;
    for (size_t i = 0; i < mr.matrix.size(); ++i) {
        double d = mr.matrix.v[i] - mf.matrix.v[i];
        s += d * d;
    }
    return std::sqrt(s);
}

namespace {

// one-hot + standardized encoding with statistics from the reference table
struct Encoder {
    std::vector<std::vector<std::string>> vocab;  // per cat slot (union)
    std::vector<double> mean, scale;              // per output column
    std::vector<int> col_offset;                  // per feature
    int dim = 0;
    TableSchema schema;
    std::vector<int> slot;

    static Encoder fit(const MetricTable& ref, const std::vector<const MetricTable*>& extra) {
        Encoder e;
        e.schema = ref.schema;
        e.slot = ref.slot;
        const int K = ref.schema.n_features();
        e.col_offset.resize(K);
        e.vocab.resize(ref.cat.size());
        for (int k = 0; k < K; ++k) {
            e.col_offset[k] = e.dim;
            if (ref.schema.is_continuous(k)) {
                e.dim += 1;
            } else {
                int s = ref.slot[k];
                std::vector<std::string> voc;
                auto add = [&](const std::vector<std::string>& col) {
                    for (const auto& lab : col)
                        if (std::find(voc.begin(), voc.end(), lab) == voc.end())
                            voc.push_back(lab);
                };
                add(ref.cat[s]);
                for (auto* t : extra) add(t->cat[s]);
                std::sort(voc.begin(), voc.end());
                e.vocab[s] = voc;
                e.dim += static_cast<int>(voc.size());
            }
        }
        // standardization statistics from the reference table
        e.mean.assign(e.dim, 0.0);
        e.scale.assign(e.dim, 1.0);
        std::vector<double> m2(e.dim, 0.0);
        const double n = static_cast<double>(ref.n_rows);
        std::vector<double> row(e.dim);
        for (int r = 0; r < ref.n_rows; ++r) {
            e.encode_raw(ref, r, row);
            for (int c = 0; c < e.dim; ++c) {
                e.mean[c] += row[c];
                m2[c] += row[c] * row[c];
            }
        }
        for (int c = 0; c < e.dim; ++c) {
            e.mean[c] /= n;
            double var = m2[c] / n - e.mean[c] * e.mean[c];
            e.scale[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
        }
        return e;
    }

    void encode_raw(const MetricTable& t, int r, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (int k = 0; k < schema.n_features(); ++k) {
            int s = slot[k];
            if (schema.is_continuous(k)) {
                out[col_offset[k]] = t.cont[s][r];
            } else {
                const auto& voc = vocab[s];
                auto it = std::find(voc.begin(), voc.end(), t.cat[s][r]);
                if (it != voc.end()) out[col_offset[k] + (it - voc.begin())] = 1.0;
            }
        }
    }

    void encode(const MetricTable& t, int r, std::vector<double>& out) const {
        encode_raw(t, r, out);
        for (int c = 0; c < dim; ++c) out[c] = (out[c] - mean[c]) / scale[c];
    }

    Mat<double> encode_all(const MetricTable& t) const {
        Mat<double> X(t.n_rows, dim);
        std::vector<double> row(dim);
        for (int r = 0; r < t.n_rows; ++r) {
            encode(t, r, row);
            std::copy(row.begin(), row.end(), X[r]);
        }
        return X;
    }
};

}  // namespace

double dcr(const MetricTable& train, const MetricTable& query, int threads) {
    if (train.n_rows == 0 || query.n_rows == 0) throw std::invalid_argument("dcr: empty table");
    Encoder enc = Encoder::fit(train, {&query});
    Mat<double> T = enc.encode_all(train);
    Mat<double> Q = enc.encode_all(query);

    std::vector<double> mins(query.n_rows);
    auto worker = [&](int lo, int hi) {
        for (int q = lo; q < hi; ++q) {
            double best = std::numeric_limits<double>::infinity();
            const double* qr = Q[q];
            for (int r = 0; r < train.n_rows; ++r) {
                const double* tr = T[r];
                double d2 = 0.0;
                for (int c = 0; c < enc.dim; ++c) {
                    double d = qr[c] - tr[c];
                    d2 += d * d;
                }
                if (d2 < best) best = d2;
            }
            mins[q] = std::sqrt(best);
        }
    };
    threads = std::max(1, std::min(threads, query.n_rows));
    if (threads == 1) {
        worker(0, query.n_rows);
    } else {
        std::vector<std::thread> pool;
        int chunk = (query.n_rows + threads - 1) / threads;
        for (int w = 0; w < threads; ++w) {
            int lo = w * chunk;
            int hi = std::min(query.n_rows, lo + chunk);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    double s = 0.0;
    for (double m : mins) s += m;
    return s / query.n_rows;
}

namespace {

struct Logistic {
    std::vector<double> w;
    double b = 0.0;

    // full-batch Adam on the L2-penalized logistic loss
    void fit(const Mat<double>& X, const std::vector<int>& y, double l2, int iters = 400,
             double lr = 0.1) {
        const int n = X.rows, p = X.cols;
        w.assign(p, 0.0);
        b = 0.0;
        std::vector<double> mw(p, 0.0), vw(p, 0.0), g(p);
        double mb = 0, vb = 0;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        for (int it = 1; it <= iters; ++it) {
            std::fill(g.begin(), g.end(), 0.0);
            double gb = 0.0;
            for (int r = 0; r < n; ++r) {
                const double* xr = X[r];
                double z = b;
                for (int c = 0; c < p; ++c) z += w[c] * xr[c];
                double pr = 1.0 / (1.0 + std::exp(-z));
                double d = (pr - y[r]) / n;
                for (int c = 0; c < p; ++c) g[c] += d * xr[c];
                gb += d;
            }
            for (int c = 0; c < p; ++c) g[c] += l2 * w[c];
            double c1 = 1.0 - std::pow(b1, it), c2 = 1.0 - std::pow(b2, it);
            for (int c = 0; c < p; ++c) {
                mw[c] = b1 * mw[c] + (1 - b1) * g[c];
                vw[c] = b2 * vw[c] + (1 - b2) * g[c] * g[c];
                w[c] -= lr * (mw[c] / c1) / (std::sqrt(vw[c] / c2) + eps);
            }
            mb = b1 * mb + (1 - b1) * gb;
            vb = b2 * vb + (1 - b2) * gb * gb;
            b -= lr * (mb / c1) / (std::sqrt(vb / c2) + eps);
        }
    }

    double score(const double* xr, int p) const {
        double z = b;
        for (int c = 0; c < p; ++c) z += w[c] * xr[c];
        return z;
    }
    double accuracy(const Mat<double>& X, const std::vector<int>& y) const {
        int ok = 0;
        for (int r = 0; r < X.rows; ++r) ok += ((score(X[r], X.cols) > 0.0) == (y[r] == 1));
        return static_cast<double>(ok) / X.rows;
    }
};

Mat<double> vstack(const Mat<double>& a, const Mat<double>& b) {
    Mat<double> out(a.rows + b.rows, a.cols);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

}  // namespace

double detection_score(const MetricTable& real_train, const MetricTable& real_valid,
                       const MetricTable& real_test, const MetricTable& fake_train,
                       const MetricTable& fake_valid, const MetricTable& fake_test,
                       uint64_t /*seed*/) {
    if (fake_train.n_rows != real_train.n_rows || fake_valid.n_rows != real_valid.n_rows ||
        fake_test.n_rows != real_test.n_rows)
        throw std::invalid_argument("detection: fake counts must match per-split real counts");

    // mix real+fake per split; standardize with the detect-train statistics
    auto mix_labels = [](int n_real, int n_fake) {
        std::vector<int> y(n_real + n_fake, 1);
        std::fill(y.begin() + n_real, y.end(), 0);
        return y;
    };
    std::vector<const MetricTable*> all = {&real_valid, &real_test,
                                           &fake_train, &fake_valid, &fake_test};
    Encoder enc = Encoder::fit(real_train, all);

    Mat<double> Xtr = vstack(enc.encode_all(real_train), enc.encode_all(fake_train));
    Mat<double> Xva = vstack(enc.encode_all(real_valid), enc.encode_all(fake_valid));
    Mat<double> Xte = vstack(enc.encode_all(real_test), enc.encode_all(fake_test));
    auto ytr = mix_labels(real_train.n_rows, fake_train.n_rows);
    auto yva = mix_labels(real_valid.n_rows, fake_valid.n_rows);
    auto yte = mix_labels(real_test.n_rows, fake_test.n_rows);

    if (Xtr.rows < 2) throw std::invalid_argument("detection: degenerate split");

    const double grid[5] = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    double best_acc = -1.0;
    Logistic best;
    for (double l2 : grid) {
        Logistic clf;
        clf.fit(Xtr, ytr, l2);
        double acc = clf.accuracy(Xva, yva);
        if (acc > best_acc) {
            best_acc = acc;
            best = clf;
        }
    }
    return best.accuracy(Xte, yte);
}

namespace {

// ridge with an unpenalized intercept, solved by normal equations
std::vector<double> ridge_fit(const Mat<double>& X, const std::vector<double>& y, double l2) {
    const int p = X.cols + 1;  // intercept last
    std::vector<double> A(static_cast<size_t>(p) * p, 0.0);
    std::vector<double> rhs(p, 0.0);
    for (int r = 0; r < X.rows; ++r) {
        const double* xr = X[r];
        for (int i = 0; i < X.cols; ++i) {
            for (int j = i; j < X.cols; ++j) A[static_cast<size_t>(i) * p + j] += xr[i] * xr[j];
            A[static_cast<size_t>(i) * p + (p - 1)] += xr[i];
            rhs[i] += xr[i] * y[r];
        }
        A[static_cast<size_t>(p - 1) * p + (p - 1)] += 1.0;
        rhs[p - 1] += y[r];
    }
    for (int i = 0; i < X.cols; ++i) A[static_cast<size_t>(i) * p + i] += l2;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < i; ++j) A[static_cast<size_t>(i) * p + j] = A[static_cast<size_t>(j) * p + i];

    // Gaussian elimination with partial pivoting
    std::vector<double> w(p, 0.0);
    std::vector<int> piv(p);
    for (int i = 0; i < p; ++i) piv[i] = i;
    for (int col = 0; col < p; ++col) {
        int best = col;
        for (int r = col + 1; r < p; ++r)
            if (std::fabs(A[static_cast<size_t>(r) * p + col]) >
                std::fabs(A[static_cast<size_t>(best) * p + col]))
                best = r;
        if (best != col) {
            for (int c = 0; c < p; ++c)
                std::swap(A[static_cast<size_t>(col) * p + c], A[static_cast<size_t>(best) * p + c]);
            std::swap(rhs[col], rhs[best]);
        }
        double d = A[static_cast<size_t>(col) * p + col];
        if (std::fabs(d) < 1e-12) continue;
        for (int r = col + 1; r < p; ++r) {
            double f = A[static_cast<size_t>(r) * p + col] / d;
            if (f == 0.0) continue;
            for (int c = col; c < p; ++c)
                A[static_cast<size_t>(r) * p + c] -= f * A[static_cast<size_t>(col) * p + c];
            rhs[r] -= f * rhs[col];
        }
    }
    for (int i = p - 1; i >= 0; --i) {
        double s = rhs[i];
        for (int j = i + 1; j < p; ++j) s -= A[static_cast<size_t>(i) * p + j] * w[j];
        double d = A[static_cast<size_t>(i) * p + i];
        w[i] = std::fabs(d) > 1e-12 ? s / d : 0.0;
    }
    return w;
}

}  // namespace

EfficiencyResult ml_efficiency_linear(const MetricTable& train, const MetricTable& test) {
    if (!train.schema.target_index) throw std::invalid_argument("efficiency: schema has no target");
    const int tk = *train.schema.target_index;

    // features = all columns except the target
    auto strip_target = [&](const MetricTable& t) {
        MetricTable out;
        out.schema.name = t.schema.name;
        out.n_rows = t.n_rows;
        out.slot.clear();
        for (int k = 0; k < t.schema.n_features(); ++k) {
            if (k == tk) continue;
            out.schema.features.push_back(t.schema.features[k]);
            if (t.schema.is_continuous(k)) {
                out.slot.push_back(static_cast<int>(out.cont.size()));
                out.cont.push_back(t.cont[t.slot[k]]);
            } else {
                out.slot.push_back(static_cast<int>(out.cat.size()));
                out.cat.push_back(t.cat[t.slot[k]]);
            }
        }
        return out;
    };
    MetricTable xtr = strip_target(train);
    MetricTable xte = strip_target(test);
    Encoder enc = Encoder::fit(xtr, {&xte});
    Mat<double> Xtr = enc.encode_all(xtr);
    Mat<double> Xte = enc.encode_all(xte);

    EfficiencyResult res;
    if (train.schema.is_continuous(tk)) {
        res.classification = false;
        const auto& ytr = train.cont[train.slot[tk]];
        const auto& yte = test.cont[test.slot[tk]];
        auto w = ridge_fit(Xtr, ytr, 1.0);
        double se = 0.0;
        for (int r = 0; r < Xte.rows; ++r) {
            double pred = w[Xte.cols];
            const double* xr = Xte[r];
            for (int c = 0; c < Xte.cols; ++c) pred += w[c] * xr[c];
            se += (pred - yte[r]) * (pred - yte[r]);
        }
        res.rmse = std::sqrt(se / Xte.rows);
        return res;
    }

    res.classification = true;
    // classes from the union of train/test labels, sorted for stability
    std::vector<std::string> classes;
    for (const auto& s : train.cat[train.slot[tk]])
        if (std::find(classes.begin(), classes.end(), s) == classes.end()) classes.push_back(s);
    for (const auto& s : test.cat[test.slot[tk]])
        if (std::find(classes.begin(), classes.end(), s) == classes.end()) classes.push_back(s);
    std::sort(classes.begin(), classes.end());
    const int C = static_cast<int>(classes.size());
    auto code_of = [&](const std::string& s) {
        return static_cast<int>(std::find(classes.begin(), classes.end(), s) - classes.begin());
    };

    // one-vs-rest logistic heads
    std::vector<Logistic> heads(C);
    std::vector<int> ytr(train.n_rows), yte(test.n_rows);
    for (int r = 0; r < train.n_rows; ++r) ytr[r] = code_of(train.cat[train.slot[tk]][r]);
    for (int r = 0; r < test.n_rows; ++r) yte[r] = code_of(test.cat[test.slot[tk]][r]);
    for (int c = 0; c < C; ++c) {
        std::vector<int> yb(train.n_rows);
        for (int r = 0; r < train.n_rows; ++r) yb[r] = (ytr[r] == c) ? 1 : 0;
        heads[c].fit(Xtr, yb, 1.0 / train.n_rows, 500);
    }

    // macro F1 + one-vs-rest macro AUC on the test split
    std::vector<int> pred(test.n_rows);
    Mat<double> scores(test.n_rows, C);
    for (int r = 0; r < test.n_rows; ++r) {
        int best = 0;
        for (int c = 0; c < C; ++c) {
            scores[r][c] = heads[c].score(Xte[r], Xte.cols);
            if (scores[r][c] > scores[r][best]) best = c;
        }
        pred[r] = best;
    }
    double f1_sum = 0.0;
    for (int c = 0; c < C; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (int r = 0; r < test.n_rows; ++r) {
            if (pred[r] == c && yte[r] == c) ++tp;
            else if (pred[r] == c) ++fp;
            else if (yte[r] == c) ++fn;
        }
        double denom = 2 * tp + fp + fn;
        f1_sum += denom > 0 ? 2 * tp / denom : 0.0;
    }
    res.macro_f1 = f1_sum / C;

    double auc_sum = 0.0;
    int auc_terms = 0;
    for (int c = 0; c < C; ++c) {
        // Mann-Whitney with midranks
        std::vector<std::pair<double, int>> sc(test.n_rows);
        double n_pos = 0;
        for (int r = 0; r < test.n_rows; ++r) {
            sc[r] = {scores[r][c], yte[r] == c ? 1 : 0};
            n_pos += sc[r].second;
        }
        double n_neg = test.n_rows - n_pos;
        if (n_pos == 0 || n_neg == 0) continue;
        std::sort(sc.begin(), sc.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double rank_sum_pos = 0.0;
        size_t i = 0;
        while (i < sc.size()) {
            size_t j = i;
            while (j + 1 < sc.size() && sc[j + 1].first == sc[i].first) ++j;
            double midrank = 0.5 * static_cast<double>((i + 1) + (j + 1));
            for (size_t k = i; k <= j; ++k)
                if (sc[k].second) rank_sum_pos += midrank;
            i = j + 1;
        }
        auc_sum += (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
        ++auc_terms;
    }
    res.auc = auc_terms > 0 ? auc_sum / auc_terms : 0.0;
    return res;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["cat_features"] = cat_features;
    j["cont_features"] = cont_features;
    j["jsd_per_feature"] = jsd_per_feature;
    j["jsd_mean"] = jsd_mean;
    j["wd_per_feature"] = wd_per_feature;
    j["wd_mean"] = wd_mean;
    j["corr_l2"] = corr_l2;
    j["dcr_gen"] = dcr_gen;
    j["dcr_test"] = dcr_test;
    j["dcr_abs_diff"] = dcr_abs_diff;
    j["detection_accuracy_proxy"] = detection_accuracy_proxy;
    if (eff_real && eff_fake) {
        nlohmann::json e;
        if (eff_real->classification) {
            e["real"] = {{"macro_f1", eff_real->macro_f1}, {"auc", eff_real->auc}};
            e["fake"] = {{"macro_f1", eff_fake->macro_f1}, {"auc", eff_fake->auc}};
            e["abs_diff"] = {{"macro_f1", std::fabs(eff_real->macro_f1 - eff_fake->macro_f1)},
                             {"auc", std::fabs(eff_real->auc - eff_fake->auc)}};
        } else {
            e["real"] = {{"rmse", eff_real->rmse}};
            e["fake"] = {{"rmse", eff_fake->rmse}};
            e["abs_diff"] = {{"rmse", std::fabs(eff_real->rmse - eff_fake->rmse)}};
        }
        j["ml_efficiency_linear"] = e;
    }
    j["metadata"] = {{"jsd_log_base", 2},
                     {"wd_scaling", "real_column_min_max_range"},
                     {"detection_model", "l2_logistic_proxy"}};
    return j.dump(2);
}

namespace {

MetricTable take_rows(const MetricTable& t, int lo, int hi) {
    MetricTable out;
    out.schema = t.schema;
    out.slot = t.slot;
    out.n_rows = hi - lo;
    out.cont.resize(t.cont.size());
    out.cat.resize(t.cat.size());
    for (size_t s = 0; s < t.cont.size(); ++s)
        out.cont[s].assign(t.cont[s].begin() + lo, t.cont[s].begin() + hi);
    for (size_t s = 0; s < t.cat.size(); ++s)
        out.cat[s].assign(t.cat[s].begin() + lo, t.cat[s].begin() + hi);
    return out;
}

MetricTable take_rows(const MetricTable& t, const std::vector<int>& idx) {
    MetricTable out;
    out.schema = t.schema;
    out.slot = t.slot;
    out.n_rows = static_cast<int>(idx.size());
    out.cont.resize(t.cont.size());
    out.cat.resize(t.cat.size());
    for (size_t s = 0; s < t.cont.size(); ++s) {
        out.cont[s].reserve(idx.size());
        for (int i : idx) out.cont[s].push_back(t.cont[s][i]);
    }
    for (size_t s = 0; s < t.cat.size(); ++s) {
        out.cat[s].reserve(idx.size());
        for (int i : idx) out.cat[s].push_back(t.cat[s][i]);
    }
    return out;
}

}  // namespace

EvalReport evaluate(const MetricTable& real_train, const MetricTable& real_test,
                    const MetricTable& fake, uint64_t seed, int threads) {
    EvalReport rep;
    const auto& schema = real_test.schema;
    for (int k = 0; k < schema.n_features(); ++k) {
        int s = real_test.slot[k];
        if (schema.is_continuous(k)) {
            rep.cont_features.push_back(schema.features[k].name);
            rep.wd_per_feature.push_back(wasserstein_1d(real_test.cont[s], fake.cont[s]));
        } else {
            rep.cat_features.push_back(schema.features[k].name);
            rep.jsd_per_feature.push_back(jsd(real_test.cat[s], fake.cat[s]));
        }
    }
    for (double v : rep.jsd_per_feature) rep.jsd_mean += v;
    if (!rep.jsd_per_feature.empty()) rep.jsd_mean /= rep.jsd_per_feature.size();
    for (double v : rep.wd_per_feature) rep.wd_mean += v;
    if (!rep.wd_per_feature.empty()) rep.wd_mean /= rep.wd_per_feature.size();

    rep.corr_l2 = corr_l2(real_test, fake);

    rep.dcr_gen = dcr(real_train, fake, threads);
    rep.dcr_test = dcr(real_train, real_test, threads);
    rep.dcr_abs_diff = std::fabs(rep.dcr_gen - rep.dcr_test);

    // detection protocol: carve a validation part out of the real train
    // split (75/25, seeded), cap split sizes, and give the detector
    // matching numbers of fake rows per split
    const int cap = 25000;
    Rng rng(seed);
    std::vector<int> perm(real_train.n_rows);
    for (int i = 0; i < real_train.n_rows; ++i) perm[i] = i;
    for (size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
    int n_tr = std::min(cap, real_train.n_rows * 3 / 4);
    int n_va = std::min(cap, real_train.n_rows - real_train.n_rows * 3 / 4);
    int n_te = std::min(cap, real_test.n_rows);
    int need = n_tr + n_va + n_te;
    if (fake.n_rows < need) {
        // shrink proportionally so the fake pool covers all three splits
        double f = static_cast<double>(fake.n_rows) / need;
        n_tr = static_cast<int>(n_tr * f);
        n_va = static_cast<int>(n_va * f);
        n_te = std::min(n_te, fake.n_rows - n_tr - n_va);
    }
    if (n_tr < 1 || n_va < 1 || n_te < 1)
        throw std::invalid_argument("evaluate: not enough rows for the detection protocol");

    std::vector<int> idx_tr(perm.begin(), perm.begin() + n_tr);
    std::vector<int> idx_va(perm.begin() + n_tr, perm.begin() + n_tr + n_va);
    MetricTable dtr = take_rows(real_train, idx_tr);
    MetricTable dva = take_rows(real_train, idx_va);
    MetricTable dte = take_rows(real_test, 0, n_te);
    MetricTable ftr = take_rows(fake, 0, n_tr);
    MetricTable fva = take_rows(fake, n_tr, n_tr + n_va);
    MetricTable fte = take_rows(fake, n_tr + n_va, n_tr + n_va + n_te);
    rep.detection_accuracy_proxy = detection_score(dtr, dva, dte, ftr, fva, fte, seed);

    if (schema.target_index) {
        rep.eff_real = ml_efficiency_linear(real_train, real_test);
        rep.eff_fake = ml_efficiency_linear(fake, real_test);
    }
    return rep;
}

}  // namespace cdtd::metrics
