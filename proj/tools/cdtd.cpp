#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cdtd/checkpoint.hpp"
#include "cdtd/csv.hpp"
#include "cdtd/dataset.hpp"
#include "cdtd/metrics.hpp"
#include "cdtd/sampler.hpp"
#include "cdtd/schedule.hpp"
#include "cdtd/synthetic.hpp"
#include "cdtd/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path)) throw UsageError(what + " not found: " + path);
}

nlohmann::json load_json_file(const std::string& path, const std::string& what) {
    require_file(path, what);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(what + ": invalid JSON: " + e.what());
    }
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& schema_path, const std::string& out_path) {
    cdtd::TableSchema schema;
    nlohmann::json cfg;
    cdtd::RawTable raw;
    try {
        require_file(schema_path, "schema");
        schema = cdtd::TableSchema::from_json_file(schema_path);
        cfg = load_json_file(config_path, "config");
        require_file(data_path, "data");
        raw = cdtd::load_csv(data_path, schema);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (raw.n_dropped > 0)
            std::cout << "dropped " << raw.n_dropped
                      << " rows with missing continuous/target cells\n";

        uint64_t seed = cfg.value("seed", 0ULL);
        bool stratify = schema.target_index && !schema.is_continuous(*schema.target_index);
        stratify = cfg.value("stratify", stratify);
        const std::vector<std::string>* labels_ptr = nullptr;
        std::vector<std::string> labels;
        if (stratify) {
            if (!schema.target_index) throw UsageError("stratify requires a target");
            for (const auto& row : raw.rows) labels.push_back(row[*schema.target_index]);
            labels_ptr = &labels;
        }
        auto idx = cdtd::split_indices(static_cast<int>(raw.rows.size()), {0.6, 0.2, 0.2},
                                       labels_ptr, seed);
        cdtd::RawTable train_raw = cdtd::subset(raw, idx.train);
        cdtd::RawTable valid_raw = cdtd::subset(raw, idx.valid);
        cdtd::PreprocState preproc = cdtd::fit_preprocessing(train_raw);
        cdtd::Dataset train = cdtd::encode_dataset(train_raw, preproc);
        cdtd::Dataset valid = cdtd::encode_dataset(valid_raw, preproc);

        cdtd::ModelOptions mo;
        mo.schedule_mode = cdtd::schedule_mode_from_string(cfg.value("schedule", "per_type"));
        mo.trunk_width = cfg.value("trunk_width", 796);
        mo.hidden_dim = cfg.value("hidden_dim", 256);
        mo.embed_dim = cfg.value("embed_dim", 16);
        mo.sigma_max_cont = cfg.value("sigma_max_cont", 80.0);
        mo.sigma_max_cat = cfg.value("sigma_max_cat", 100.0);
        mo.seed = seed;
        cdtd::Model model = cdtd::build_model(preproc, mo);

        cdtd::TrainConfig tc;
        tc.steps = cfg.value("steps", 30000LL);
        tc.batch = cfg.value("batch", 4096);
        tc.lr = cfg.value("lr", 0.001);
        tc.warmup = cfg.value("warmup", 1000LL);
        tc.ema_decay = cfg.value("ema_decay", 0.999);
        tc.seed = seed;
        tc.log_every = cfg.value("log_every", 100LL);
        tc.val_every = cfg.value("val_every", 500LL);
        tc.schedule_lr = cfg.value("schedule_lr", 0.01);
        tc.log = [](const std::string& line) { std::cout << line << "\n"; };
        cdtd::train_model(model, train, &valid, tc);

        cdtd::save_checkpoint(model, out_path);
        std::cout << "checkpoint written to " << out_path << "\n";

        if (cfg.contains("dump_schedule_csv")) {
            std::vector<std::string> names;
            for (int i = 0; i < model.k_cont(); ++i) names.push_back("cont" + std::to_string(i));
            for (int j = 0; j < model.k_cat(); ++j) names.push_back("cat" + std::to_string(j));
            cdtd::write_sigma_grid_csv(model.schedules, names,
                                       cfg["dump_schedule_csv"].get<std::string>());
        }
        return kExitOk;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_sample(const std::string& model_path, int n, int steps, uint64_t seed,
               const std::string& out_path) {
    cdtd::Model model;
    try {
        require_file(model_path, "model");
        model = cdtd::load_checkpoint(model_path);
        if (n <= 0) throw UsageError("--n must be positive");
        if (steps <= 0) throw UsageError("--steps must be positive");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        cdtd::SampleConfig sc;
        sc.n_rows = n;
        sc.steps = steps;
        sc.seed = seed;
        cdtd::generate_to_csv(model, sc, out_path);
        std::cout << "wrote " << n << " rows to " << out_path << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_eval(const std::string& real_path, const std::string& fake_path,
             const std::string& schema_path, const std::string& train_path,
             const std::string& out_path) {
    cdtd::metrics::MetricTable real_test, fake, train;
    try {
        require_file(schema_path, "schema");
        cdtd::TableSchema schema = cdtd::TableSchema::from_json_file(schema_path);
        require_file(real_path, "real csv");
        require_file(fake_path, "fake csv");
        require_file(train_path, "train csv");
        real_test = cdtd::metrics::MetricTable::from_raw(cdtd::load_csv(real_path, schema));
        fake = cdtd::metrics::MetricTable::from_raw(cdtd::load_csv(fake_path, schema));
        train = cdtd::metrics::MetricTable::from_raw(cdtd::load_csv(train_path, schema));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        auto report =
            cdtd::metrics::evaluate(train, real_test, fake, 0, cdtd::resolve_threads(0));
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        out << report.to_json() << "\n";
        std::cout << "report written to " << out_path << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_make_synthetic(const std::string& spec_path, int n, uint64_t seed,
                       const std::string& out_path) {
    cdtd::CopulaSpec spec;
    try {
        require_file(spec_path, "copula spec");
        spec = cdtd::CopulaSpec::from_json_file(spec_path);
        if (n <= 0) throw UsageError("--n must be positive");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    try {
        cdtd::make_synthetic_csv(spec, n, seed, out_path);
        std::cout << "wrote " << n << " rows to " << out_path << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous diffusion for mixed-type tabular data"};
    app.require_subcommand(1);

    std::string config_path, data_path, schema_path, out_path, model_path, real_path,
        fake_path, train_path, spec_path;
    int n = 1000, steps = 200;
    uint64_t seed = 0;

    auto* train_cmd = app.add_subcommand("train", "train a model on a CSV table");
    train_cmd->add_option("--config", config_path, "training config JSON")->required();
    train_cmd->add_option("--data", data_path, "input CSV")->required();
    train_cmd->add_option("--schema", schema_path, "schema JSON")->required();
    train_cmd->add_option("--out", out_path, "output checkpoint")->required();

    auto* sample_cmd = app.add_subcommand("sample", "generate rows from a checkpoint");
    sample_cmd->add_option("--model", model_path, "checkpoint path")->required();
    sample_cmd->add_option("--n", n, "number of rows");
    sample_cmd->add_option("--steps", steps, "sampler steps");
    sample_cmd->add_option("--seed", seed, "sampling seed");
    sample_cmd->add_option("--out", out_path, "output CSV")->required();

    auto* eval_cmd = app.add_subcommand("eval", "compare a generated table against real data");
    eval_cmd->add_option("--real", real_path, "real (test) CSV")->required();
    eval_cmd->add_option("--fake", fake_path, "generated CSV")->required();
    eval_cmd->add_option("--schema", schema_path, "schema JSON")->required();
    eval_cmd->add_option("--train", train_path, "real training CSV")->required();
    eval_cmd->add_option("--out", out_path, "output report JSON")->required();

    auto* synth_cmd =
        app.add_subcommand("make-synthetic", "generate a ground-truth copula table");
    synth_cmd->add_option("--spec", spec_path, "copula spec JSON")->required();
    synth_cmd->add_option("--n", n, "number of rows");
    synth_cmd->add_option("--seed", seed, "generator seed");
    synth_cmd->add_option("--out", out_path, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    if (train_cmd->parsed()) return cmd_train(config_path, data_path, schema_path, out_path);
    if (sample_cmd->parsed()) return cmd_sample(model_path, n, steps, seed, out_path);
    if (eval_cmd->parsed())
        return cmd_eval(real_path, fake_path, schema_path, train_path, out_path);
    if (synth_cmd->parsed()) return cmd_make_synthetic(spec_path, n, seed, out_path);
    return kExitUsage;
}
