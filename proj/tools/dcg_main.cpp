// Command-line front end. Talks to the core exclusively through the C
// API in dcg.h; exit codes are the dcg_status values (0 ok, 2 config,
// 3 numeric).
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcg.h"

namespace {

int fail(dcg_status status) {
    std::fprintf(stderr, "error: %s\n", dcg_last_error());
    return static_cast<int>(status);
}

bool read_file(const std::string& path, std::string& out) {
    std::ifstream in(path);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return true;
}

struct DatasetHandle {
    dcg_dataset* ds = nullptr;
    ~DatasetHandle() { dcg_dataset_close(ds); }
};

// Loads --data and --config; returns 0 or the exit code.
int load_common(const std::string& data_dir, const std::string& config_path,
                DatasetHandle& ds, std::string& config_json) {
    if (config_path.empty()) {
        config_json = "{}";
    } else if (!read_file(config_path, config_json)) {
        std::fprintf(stderr, "error: cannot read config file %s\n", config_path.c_str());
        return static_cast<int>(DCG_ERR_CONFIG);
    }
    if (dcg_status s = dcg_dataset_open(data_dir.c_str(), &ds.ds)) return fail(s);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"domain convex game laboratory"};
    app.require_subcommand(1);

    std::string manifest_path, data_dir, config_path, out_dir;
    int holdout = 0;
    unsigned long long seed = 0;
    std::vector<int> n_values = {0, 4, 8, 16, 32, 64};
    std::vector<double> omegas = {0.01, 0.05, 0.1, 0.5, 1.0};
    std::vector<int> ks = {1, 3, 5, 7, 9};
    int dump_count = 8;

    auto* gen = app.add_subcommand("generate-data", "generate a dataset from a manifest");
    gen->add_option("manifest", manifest_path, "manifest JSON file")->required();
    gen->add_option("out", out_dir, "output dataset directory")->required();

    auto add_run_options = [&](CLI::App* cmd, bool with_seed) {
        cmd->add_option("--config", config_path, "train config JSON file");
        cmd->add_option("--data", data_dir, "dataset directory")->required();
        cmd->add_option("--holdout", holdout, "held-out domain id")->required();
        if (with_seed) cmd->add_option("--seed", seed, "run seed");
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    auto* train_cmd = app.add_subcommand("train", "one leave-one-domain-out run");
    add_run_options(train_cmd, true);

    auto* sweep = app.add_subcommand("sweep-diversity", "accuracy vs augmented-domain count");
    add_run_options(sweep, false);
    sweep->add_option("--n", n_values, "augmented-domain counts (ascending)");

    auto* ablate_cmd = app.add_subcommand("ablate", "all variants x holdouts x seeds");
    ablate_cmd->add_option("--config", config_path, "train config JSON file");
    ablate_cmd->add_option("--data", data_dir, "dataset directory")->required();
    ablate_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* sens = app.add_subcommand("sensitivity", "omega x k accuracy grid");
    add_run_options(sens, false);
    sens->add_option("--omega", omegas, "omega grid");
    sens->add_option("--k", ks, "k grid");

    auto* disc = app.add_subcommand("discussion", "meta-split / filter-scope variants");
    add_run_options(disc, false);

    auto* oracles = app.add_subcommand("verify-oracles", "analytical oracle battery");
    std::string oracle_json;
    unsigned long long oracle_seed = 2026;
    oracles->add_option("--seed", oracle_seed, "oracle seed");
    oracles->add_option("--json", oracle_json, "JSON report path");

    auto* dump = app.add_subcommand("dump-filtered", "write most/least discarded samples");
    add_run_options(dump, true);
    dump->add_option("--count", dump_count, "images per group");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(DCG_ERR_CONFIG);
    }

    if (gen->parsed()) {
        std::string manifest;
        if (!read_file(manifest_path, manifest)) {
            std::fprintf(stderr, "error: cannot read manifest %s\n", manifest_path.c_str());
            return static_cast<int>(DCG_ERR_CONFIG);
        }
        if (dcg_status s = dcg_generate_data(manifest.c_str(), out_dir.c_str()))
            return fail(s);
        std::printf("dataset written to %s\n", out_dir.c_str());
        return 0;
    }
    if (oracles->parsed()) {
        int pass = 0;
        if (dcg_status s = dcg_verify_oracles(
                oracle_seed, oracle_json.empty() ? nullptr : oracle_json.c_str(), &pass))
            return fail(s);
        std::printf("oracles: %s\n", pass ? "all passed" : "FAILED");
        return pass ? 0 : static_cast<int>(DCG_ERR_NUMERIC);
    }

    DatasetHandle ds;
    std::string config_json;
    if (int code = load_common(data_dir, config_path, ds, config_json)) return code;

    dcg_status s = DCG_OK;
    if (train_cmd->parsed()) {
        s = dcg_train(ds.ds, config_json.c_str(), holdout, seed, out_dir.c_str());
    } else if (sweep->parsed()) {
        s = dcg_sweep_diversity(ds.ds, config_json.c_str(), holdout, n_values.data(),
                                static_cast<int>(n_values.size()), out_dir.c_str());
    } else if (ablate_cmd->parsed()) {
        s = dcg_ablate(ds.ds, config_json.c_str(), out_dir.c_str());
    } else if (sens->parsed()) {
        s = dcg_sensitivity(ds.ds, config_json.c_str(), holdout, omegas.data(),
                            static_cast<int>(omegas.size()), ks.data(),
                            static_cast<int>(ks.size()), out_dir.c_str());
    } else if (disc->parsed()) {
        s = dcg_discussion(ds.ds, config_json.c_str(), holdout, out_dir.c_str());
    } else if (dump->parsed()) {
        s = dcg_dump_filtered(ds.ds, config_json.c_str(), holdout, seed, dump_count,
                              out_dir.c_str());
    }
    if (s != DCG_OK) return fail(s);
    std::printf("outputs written to %s\n", out_dir.c_str());
    return 0;
}
