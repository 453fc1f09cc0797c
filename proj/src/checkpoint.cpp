#include "cdtd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cdtd {

namespace {

// fixed little-endian primitives
template <typename T>
void put(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put<uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    uint64_t n = get<uint64_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

void put_tensor(std::ostream& os, const std::string& name, const Mat<float>& m) {
    put_string(os, name);
    put<uint32_t>(os, 2);
    put<uint32_t>(os, static_cast<uint32_t>(m.rows));
    put<uint32_t>(os, static_cast<uint32_t>(m.cols));
    for (float x : m.v) put<float>(os, x);
}

void get_tensor(std::istream& is, const std::string& expect_name, Mat<float>& m) {
    std::string name = get_string(is);
    if (name != expect_name)
        throw std::runtime_error("checkpoint: expected tensor '" + expect_name + "', found '" +
                                 name + "'");
    uint32_t nd = get<uint32_t>(is);
    if (nd != 2) throw std::runtime_error("checkpoint: bad tensor rank");
    uint32_t r = get<uint32_t>(is), c = get<uint32_t>(is);
    if (static_cast<int>(r) != m.rows || static_cast<int>(c) != m.cols)
        throw std::runtime_error("checkpoint: tensor shape mismatch for '" + name + "'");
    for (auto& x : m.v) x = get<float>(is);
}

void put_f64_vec(std::ostream& os, const std::vector<double>& v) {
    put<uint64_t>(os, v.size());
    for (double x : v) put<double>(os, x);
}

std::vector<double> get_f64_vec(std::istream& is) {
    uint64_t n = get<uint64_t>(is);
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>(is);
    return v;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);

    os.write("CDTD", 4);
    put<uint32_t>(os, kCheckpointVersion);
    put_string(os, model.schema.to_json());

    // preprocessing state
    const auto& pp = model.preproc;
    put<uint32_t>(os, static_cast<uint32_t>(pp.cont.size()));
    for (const auto& c : pp.cont) {
        put_f64_vec(os, c.knot_values);
        put_f64_vec(os, c.knot_ranks);
        put<double>(os, c.mean);
        put<double>(os, c.stdev);
    }
    put<uint32_t>(os, static_cast<uint32_t>(pp.cat.size()));
    for (const auto& c : pp.cat) {
        put<uint32_t>(os, static_cast<uint32_t>(c.vocab.size()));
        for (const auto& s : c.vocab) put_string(os, s);
        put_f64_vec(os, c.proportions);
        put<double>(os, c.entropy);
    }

    // schedule registry
    const auto& reg = model.schedules;
    put<uint32_t>(os, static_cast<uint32_t>(reg.mode));
    put<double>(os, reg.sigma_min_cont);
    put<double>(os, reg.sigma_max_cont);
    put<double>(os, reg.sigma_min_cat);
    put<double>(os, reg.sigma_max_cat);
    put<uint32_t>(os, static_cast<uint32_t>(reg.feature_is_cont.size()));
    for (uint8_t b : reg.feature_is_cont) put<uint8_t>(os, b);
    for (int e : reg.entry_of_feature) put<uint32_t>(os, static_cast<uint32_t>(e));
    put<uint32_t>(os, static_cast<uint32_t>(reg.entries.size()));
    for (const auto& e : reg.entries) {
        put<double>(os, e.raw_mu);
        put<double>(os, e.raw_nu);
        put<double>(os, e.raw_gamma);
        put<double>(os, e.sigma_min);
        put<double>(os, e.sigma_max);
    }

    // network config
    const auto& nc = model.net_cfg;
    put<uint32_t>(os, static_cast<uint32_t>(nc.k_cont));
    put<uint32_t>(os, static_cast<uint32_t>(nc.cardinalities.size()));
    for (int c : nc.cardinalities) put<uint32_t>(os, static_cast<uint32_t>(c));
    put<uint32_t>(os, static_cast<uint32_t>(nc.embed_dim));
    put<uint32_t>(os, static_cast<uint32_t>(nc.hidden_dim));
    put<uint32_t>(os, static_cast<uint32_t>(nc.trunk_width));
    put<uint32_t>(os, static_cast<uint32_t>(nc.time_freqs));
    put<double>(os, nc.time_freq_max);
    put<double>(os, nc.timestep_scale);
    put<double>(os, nc.sigma_init);
    put<uint32_t>(os, static_cast<uint32_t>(nc.n_classes));

    // conditioning
    put<uint8_t>(os, model.conditional ? 1 : 0);
    put<int32_t>(os, model.target_feature);
    put_f64_vec(os, model.target_proportions);
    put<uint32_t>(os, static_cast<uint32_t>(model.cont_slots.size()));
    for (int s : model.cont_slots) put<uint32_t>(os, static_cast<uint32_t>(s));
    put<uint32_t>(os, static_cast<uint32_t>(model.cat_slots.size()));
    for (int s : model.cat_slots) put<uint32_t>(os, static_cast<uint32_t>(s));

    // tensors: live then EMA
    auto live = model.net.p.named();
    put<uint32_t>(os, static_cast<uint32_t>(live.size()));
    for (auto& [name, mat] : live) put_tensor(os, name, *mat);
    auto ema = model.ema.named();
    for (auto& [name, mat] : ema) put_tensor(os, "ema." + name, *mat);

    // normalizer (float32 tensors like the network weights)
    const auto& nz = model.normalizer;
    put<uint32_t>(os, static_cast<uint32_t>(nz.freq.size()));
    for (double f : nz.freq) put<float>(os, static_cast<float>(f));
    for (double x : nz.w) put<float>(os, static_cast<float>(x));
    put<float>(os, static_cast<float>(nz.b));

    // train metadata
    put<int64_t>(os, model.trained_steps);
    put<uint64_t>(os, model.seed);
    put<double>(os, model.final_loss);
    put<double>(os, model.final_loss_cont);
    put<double>(os, model.final_loss_cat);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CDTD", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    uint32_t version = get<uint32_t>(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: version mismatch (file " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion) + ")");

    Model m;
    m.schema = TableSchema::from_json(get_string(is));

    m.preproc.schema = m.schema;
    uint32_t n_cont = get<uint32_t>(is);
    m.preproc.cont.resize(n_cont);
    for (auto& c : m.preproc.cont) {
        c.knot_values = get_f64_vec(is);
        c.knot_ranks = get_f64_vec(is);
        c.mean = get<double>(is);
        c.stdev = get<double>(is);
    }
    uint32_t n_cat = get<uint32_t>(is);
    m.preproc.cat.resize(n_cat);
    for (auto& c : m.preproc.cat) {
        uint32_t nv = get<uint32_t>(is);
        c.vocab.resize(nv);
        for (auto& s : c.vocab) s = get_string(is);
        c.proportions = get_f64_vec(is);
        c.entropy = get<double>(is);
    }
    m.preproc.slot.resize(m.schema.n_features());
    {
        int ci = 0, ki = 0;
        for (int k = 0; k < m.schema.n_features(); ++k)
            m.preproc.slot[k] = m.schema.is_continuous(k) ? ci++ : ki++;
    }

    auto& reg = m.schedules;
    reg.mode = static_cast<ScheduleMode>(get<uint32_t>(is));
    reg.sigma_min_cont = get<double>(is);
    reg.sigma_max_cont = get<double>(is);
    reg.sigma_min_cat = get<double>(is);
    reg.sigma_max_cat = get<double>(is);
    uint32_t nf = get<uint32_t>(is);
    reg.feature_is_cont.resize(nf);
    for (auto& b : reg.feature_is_cont) b = get<uint8_t>(is);
    reg.entry_of_feature.resize(nf);
    for (auto& e : reg.entry_of_feature) e = static_cast<int>(get<uint32_t>(is));
    uint32_t ne = get<uint32_t>(is);
    reg.entries.resize(ne);
    for (auto& e : reg.entries) {
        e.raw_mu = get<double>(is);
        e.raw_nu = get<double>(is);
        e.raw_gamma = get<double>(is);
        e.sigma_min = get<double>(is);
        e.sigma_max = get<double>(is);
    }

    auto& nc = m.net_cfg;
    nc.k_cont = static_cast<int>(get<uint32_t>(is));
    uint32_t ncard = get<uint32_t>(is);
    nc.cardinalities.resize(ncard);
    for (auto& c : nc.cardinalities) c = static_cast<int>(get<uint32_t>(is));
    nc.embed_dim = static_cast<int>(get<uint32_t>(is));
    nc.hidden_dim = static_cast<int>(get<uint32_t>(is));
    nc.trunk_width = static_cast<int>(get<uint32_t>(is));
    nc.time_freqs = static_cast<int>(get<uint32_t>(is));
    nc.time_freq_max = get<double>(is);
    nc.timestep_scale = get<double>(is);
    nc.sigma_init = get<double>(is);
    nc.n_classes = static_cast<int>(get<uint32_t>(is));

    nc.validate();

    m.conditional = get<uint8_t>(is) != 0;
    m.target_feature = get<int32_t>(is);
    m.target_proportions = get_f64_vec(is);
    uint32_t ncs = get<uint32_t>(is);
    m.cont_slots.resize(ncs);
    for (auto& s : m.cont_slots) s = static_cast<int>(get<uint32_t>(is));
    uint32_t nks = get<uint32_t>(is);
    m.cat_slots.resize(nks);
    for (auto& s : m.cat_slots) s = static_cast<int>(get<uint32_t>(is));

    m.net.cfg = nc;
    m.net.p.shape_like(nc);
    m.ema.shape_like(nc);
    uint32_t n_tensors = get<uint32_t>(is);
    auto live = m.net.p.named();
    if (n_tensors != live.size())
        throw std::runtime_error("checkpoint: tensor count mismatch");
    for (auto& [name, mat] : live) get_tensor(is, name, *mat);
    for (auto& [name, mat] : m.ema.named()) get_tensor(is, "ema." + name, *mat);

    uint32_t nfreq = get<uint32_t>(is);
    m.normalizer.freq.resize(nfreq);
    for (auto& f : m.normalizer.freq) f = static_cast<double>(get<float>(is));
    m.normalizer.w.resize(2 * nfreq);
    for (auto& x : m.normalizer.w) x = static_cast<double>(get<float>(is));
    m.normalizer.b = static_cast<double>(get<float>(is));
    m.normalizer.adam_m.assign(2 * nfreq, 0.0);
    m.normalizer.adam_v.assign(2 * nfreq, 0.0);

    m.trained_steps = get<int64_t>(is);
    m.seed = get<uint64_t>(is);
    m.final_loss = get<double>(is);
    m.final_loss_cont = get<double>(is);
    m.final_loss_cat = get<double>(is);
    return m;
}

}  // namespace cdtd
