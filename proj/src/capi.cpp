#include "dcg.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "dcg/oracles.hpp"
#include "dcg/train.hpp"
#include "json.hpp"

namespace {

thread_local std::string g_last_error = "";

template <typename Fn>
dcg_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return DCG_OK;
    } catch (const dcg::ContractError& e) {
        g_last_error = e.what();
        return DCG_ERR_CONFIG;
    } catch (const dcg::DimensionError& e) {
        g_last_error = e.what();
        return DCG_ERR_CONFIG;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DCG_ERR_NUMERIC;
    }
}

dcg_status require(bool ok, const char* message) {
    if (ok) return DCG_OK;
    g_last_error = message;
    return DCG_ERR_CONFIG;
}

}  // namespace

struct dcg_dataset {
    dcg::Dataset data;
};

extern "C" {

const char* dcg_last_error(void) { return g_last_error.c_str(); }

dcg_status dcg_generate_data(const char* manifest_json, const char* out_dir) {
    if (auto s = require(manifest_json && out_dir, "null argument")) return s;
    return guarded([&]() {
        dcg::DatasetManifest manifest = dcg::manifest_from_json(manifest_json);
        dcg::save_dataset(dcg::generate(manifest), out_dir);
    });
}

dcg_status dcg_dataset_open(const char* dir, dcg_dataset** out) {
    if (auto s = require(dir && out, "null argument")) return s;
    *out = nullptr;
    return guarded([&]() { *out = new dcg_dataset{dcg::load_dataset(dir)}; });
}

void dcg_dataset_close(dcg_dataset* ds) { delete ds; }

dcg_status dcg_dataset_info(const dcg_dataset* ds, char* buf, size_t cap) {
    if (auto s = require(ds && buf && cap > 0, "null argument")) return s;
    return guarded([&]() {
        nlohmann::json j;
        j["class_count"] = ds->data.manifest.class_count;
        j["shape"] = {ds->data.manifest.shape.channels, ds->data.manifest.shape.height,
                      ds->data.manifest.shape.width};
        j["seed"] = ds->data.manifest.seed;
        j["domains"] = nlohmann::json::array();
        for (const auto& [id, dd] : ds->data.by_domain)
            j["domains"].push_back({{"id", id}, {"samples", dd.samples.size()}});
        std::string text = j.dump();
        if (text.size() + 1 > cap) throw dcg::ContractError("info buffer too small");
        std::memcpy(buf, text.c_str(), text.size() + 1);
    });
}

dcg_status dcg_train(const dcg_dataset* ds, const char* config_json, int holdout_domain,
                     unsigned long long seed, const char* out_dir) {
    if (auto s = require(ds && config_json && out_dir, "null argument")) return s;
    return guarded([&]() {
        dcg::TrainConfig config = dcg::config_from_json(config_json);
        dcg::RunResult run = dcg::train(config, ds->data, holdout_domain, seed);
        dcg::write_run_outputs(config, ds->data, holdout_domain, seed, run, out_dir);
    });
}

dcg_status dcg_sweep_diversity(const dcg_dataset* ds, const char* config_json,
                               int holdout_domain, const int* n_values, int n_count,
                               const char* out_dir) {
    if (auto s = require(ds && config_json && n_values && n_count > 0 && out_dir,
                         "null argument"))
        return s;
    return guarded([&]() {
        dcg::TrainConfig config = dcg::config_from_json(config_json);
        std::vector<int> ns(n_values, n_values + n_count);
        dcg::diversity_sweep(config, ds->data, holdout_domain, ns, out_dir);
    });
}

dcg_status dcg_ablate(const dcg_dataset* ds, const char* config_json, const char* out_dir) {
    if (auto s = require(ds && config_json && out_dir, "null argument")) return s;
    return guarded([&]() {
        dcg::TrainConfig config = dcg::config_from_json(config_json);
        dcg::ablate(config, ds->data, out_dir);
    });
}

dcg_status dcg_sensitivity(const dcg_dataset* ds, const char* config_json,
                           int holdout_domain, const double* omegas, int omega_count,
                           const int* ks, int k_count, const char* out_dir) {
    if (auto s = require(ds && config_json && omegas && omega_count > 0 && ks &&
                             k_count > 0 && out_dir,
                         "null argument"))
        return s;
    return guarded([&]() {
        dcg::TrainConfig config = dcg::config_from_json(config_json);
        dcg::sensitivity(config, ds->data, holdout_domain,
                         std::vector<double>(omegas, omegas + omega_count),
                         std::vector<int>(ks, ks + k_count), out_dir);
    });
}

dcg_status dcg_discussion(const dcg_dataset* ds, const char* config_json,
                          int holdout_domain, const char* out_dir) {
    if (auto s = require(ds && config_json && out_dir, "null argument")) return s;
    return guarded([&]() {
        dcg::TrainConfig config = dcg::config_from_json(config_json);
        dcg::discussion_variants(config, ds->data, holdout_domain, out_dir);
    });
}

dcg_status dcg_dump_filtered(const dcg_dataset* ds, const char* config_json,
                             int holdout_domain, unsigned long long seed, int count,
                             const char* out_dir) {
    if (auto s = require(ds && config_json && out_dir, "null argument")) return s;
    return guarded([&]() {
        dcg::TrainConfig config = dcg::config_from_json(config_json);
        dcg::dump_filtered(config, ds->data, holdout_domain, seed, count, out_dir);
    });
}

dcg_status dcg_verify_oracles(unsigned long long seed, const char* json_out_path,
                              int* pass) {
    if (auto s = require(pass != nullptr, "null argument")) return s;
    return guarded([&]() {
        std::string table, json_text;
        *pass = dcg::verify_oracles(seed, table, json_text) ? 1 : 0;
        std::fputs(table.c_str(), stdout);
        if (json_out_path) {
            std::ofstream out(json_out_path);
            if (!out) throw dcg::ContractError("cannot open oracle report path");
            out << json_text << '\n';
        }
    });
}

}  // extern "C"
