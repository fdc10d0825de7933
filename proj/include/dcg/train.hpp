// Training loop (supervision + clamped game regularizer + sample
// filter), the experiment suite, metrics persistence.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcg/filter.hpp"
#include "dcg/model.hpp"
#include "dcg/synth.hpp"

namespace dcg {

enum class Variant {
    Baseline,        // ERM on originals only
    AugOnly,         // ERM on originals + augmented
    AugLsm,          // + clamped supermodularity regularizer
    AugLmaml,        // + MAML-style sum regularizer
    AugFsm,          // + filter scored by the clamped regularizer
    AugFmaml,        // + filter scored by the MAML regularizer
    AugLmamlFmaml,   // MAML regularizer and MAML-scored filter
    FullDcg,         // clamped regularizer and its filter
};

Variant variant_from_string(const std::string& name);
std::string variant_to_string(Variant v);
const std::vector<Variant>& all_variants();

struct VariantFlags {
    bool augment = false;
    bool reg_sm = false, reg_maml = false;        // regularizer term in the loss
    bool filter_sm = false, filter_maml = false;  // filter score source
    bool uses_regularizer() const { return reg_sm || reg_maml; }
    bool uses_filter() const { return filter_sm || filter_maml; }
};
VariantFlags variant_flags(Variant v);

enum class FilterScope { All, AugmentedOnly, OriginalsOnly };
enum class SplitMode { ByParent, Random };

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    double lr = 0.001;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double lr_decay_factor = 0.1;
    double lr_decay_at = 0.8;  // epoch fraction
    double omega = 0.1;        // regularizer weight
    int k = 5;                 // discard count per iteration
    double eta = 1.0;          // amplitude-mix strength
    int meta_test_domains = 1; // V
    int core_size = 0;         // 0 = ceil(batch/4)
    int wing_size = 0;         // 0 = ceil(batch/4)
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    Variant variant = Variant::FullDcg;
    int aug_cap = -1;  // N >= 0 caps a fixed pre-generated pool; -1 regenerates per batch
    std::vector<int> hidden = {64, 32};
    SplitMode split_mode = SplitMode::ByParent;
    FilterScope filter_scope = FilterScope::All;
    bool second_order = true;

    void validate() const;  // throws ContractError on conflicts
};

TrainConfig config_from_json(const std::string& json_text);
std::string config_to_json(const TrainConfig& config);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double reg_mean = 0.0;              // mean regularizer value over iterations
    double clamp_active_fraction = 0.0; // fraction of iterations with L_sm clamped to 0
    int filtered_count = 0;             // discarded sample slots this epoch
    double holdout_accuracy = 0.0;
};

struct MetricsRecord {
    std::vector<EpochRecord> epochs;
    double final_accuracy = 0.0;
    FilterStats filter_stats;
    // feature cache for augmented samples that hit the top/bottom-k
    // counters (originals are recovered from the dataset)
    std::map<std::int64_t, Sample> aug_cache;
};

struct RunResult {
    MetricsRecord metrics;
    ModelParams params;
};

// One leave-one-domain-out run. Asserts every iteration that no
// held-out sample id reaches a training-side structure.
RunResult train(const TrainConfig& config, const Dataset& data, int holdout_domain,
                std::uint64_t seed);

// Top-1 accuracy of the classifier over `samples`.
double evaluate_accuracy(const MlpSpec& spec, std::span<const Tensor> params,
                         const std::vector<const Sample*>& samples);

// metrics.csv + result.json + checkpoint.bin under `out_dir`.
// result.json is byte-identical across repeats of the same run.
void write_run_outputs(const TrainConfig& config, const Dataset& data, int holdout_domain,
                       std::uint64_t seed, const RunResult& result, const std::string& out_dir);

// ---- experiment suite ----------------------------------------------------

struct DiversityCurve {
    std::vector<int> n_values;
    std::vector<double> baseline_acc;  // augmentation without the game
    std::vector<double> dcg_acc;       // full pipeline
};

struct DiversityResult {
    std::vector<DiversityCurve> per_seed;
    double baseline_spearman_median = 0.0;
    double dcg_spearman_median = 0.0;
    double baseline_decreasing_steps_median = 0.0;
    double dcg_decreasing_steps_median = 0.0;
};

// Fixed pre-generated augmented pool capped at each N; N=0 degenerates
// to plain no-augmentation training for both curves.
DiversityResult diversity_sweep(const TrainConfig& config, const Dataset& data,
                                int holdout_domain, const std::vector<int>& n_values,
                                const std::string& out_dir);

struct AblationRow {
    Variant variant;
    std::map<int, double> per_holdout_mean;  // holdout domain -> mean acc over seeds
    double average = 0.0;
    double average_std = 0.0;  // population std over seeds of the per-seed average
};

std::vector<AblationRow> ablate(const TrainConfig& config, const Dataset& data,
                                const std::string& out_dir);

struct SensitivityCell {
    double omega = 0.0;
    int k = 0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

std::vector<SensitivityCell> sensitivity(const TrainConfig& config, const Dataset& data,
                                         int holdout_domain, const std::vector<double>& omegas,
                                         const std::vector<int>& ks,
                                         const std::string& out_dir);

struct DiscussionRow {
    std::string name;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

// full pipeline vs random meta-split vs filter restricted to augmented
// vs filter restricted to originals
std::vector<DiscussionRow> discussion_variants(const TrainConfig& config, const Dataset& data,
                                               int holdout_domain, const std::string& out_dir);

// Trains one run, then writes the `count` most- and least-discarded
// samples as PGM/PPM images plus an index.json.
void dump_filtered(const TrainConfig& config, const Dataset& data, int holdout_domain,
                   std::uint64_t seed, int count, const std::string& out_dir);

// ---- small statistics helpers (shared with the acceptance suite) ---------

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);
// Number of adjacent pairs with y[i+1] < y[i].
int decreasing_steps(const std::vector<double>& y);
double median(std::vector<double> values);

}  // namespace dcg
