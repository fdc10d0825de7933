#include "dcg/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "dcg/fourier.hpp"
#include "dcg/game.hpp"
#include "json.hpp"

namespace dcg {

namespace {

constexpr std::int64_t kFixedPoolIdBase = 1'000'000'000;
constexpr std::int64_t kPerBatchIdBase = 2'000'000'000;
constexpr size_t kAugCacheCap = 4096;

void parallel_for(size_t count, const std::function<void(size_t)>& fn) {
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<size_t>(workers, count));
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v), acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

// ---- variants --------------------------------------------------------------

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v = {
        Variant::Baseline, Variant::AugOnly,  Variant::AugLsm,        Variant::AugLmaml,
        Variant::AugFsm,   Variant::AugFmaml, Variant::AugLmamlFmaml, Variant::FullDcg,
    };
    return v;
}

std::string variant_to_string(Variant v) {
    switch (v) {
        case Variant::Baseline: return "baseline";
        case Variant::AugOnly: return "aug-only";
        case Variant::AugLsm: return "aug+Lsm";
        case Variant::AugLmaml: return "aug+Lmaml";
        case Variant::AugFsm: return "aug+Fsm";
        case Variant::AugFmaml: return "aug+Fmaml";
        case Variant::AugLmamlFmaml: return "aug+Lmaml+Fmaml";
        case Variant::FullDcg: return "full-DCG";
    }
    throw ContractError("variant_to_string: unknown variant");
}

Variant variant_from_string(const std::string& name) {
    for (Variant v : all_variants())
        if (variant_to_string(v) == name) return v;
    throw ContractError("unknown variant '" + name + "'");
}

VariantFlags variant_flags(Variant v) {
    VariantFlags f;
    switch (v) {
        case Variant::Baseline: break;
        case Variant::AugOnly: f.augment = true; break;
        case Variant::AugLsm: f.augment = f.reg_sm = true; break;
        case Variant::AugLmaml: f.augment = f.reg_maml = true; break;
        case Variant::AugFsm: f.augment = f.filter_sm = true; break;
        case Variant::AugFmaml: f.augment = f.filter_maml = true; break;
        case Variant::AugLmamlFmaml: f.augment = f.reg_maml = f.filter_maml = true; break;
        case Variant::FullDcg: f.augment = f.reg_sm = f.filter_sm = true; break;
    }
    return f;
}

// ---- config ----------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 1) throw ContractError("config: epochs must be >= 1");
    if (batch_size < 2) throw ContractError("config: batch size must be >= 2");
    if (lr <= 0.0) throw ContractError("config: lr must be positive");
    if (omega < 0.0) throw ContractError("config: omega must be >= 0");
    if (k < 0) throw ContractError("config: k must be >= 0");
    if (k >= batch_size) throw ContractError("config: k must be < batch size");
    if (eta < 0.0 || eta > 1.0) throw ContractError("config: eta must lie in [0,1]");
    if (meta_test_domains < 1) throw ContractError("config: V must be >= 1");
    if (aug_cap < -1) throw ContractError("config: augmented-domain cap must be >= 0 (or -1)");
    if (seeds.empty()) throw ContractError("config: at least one seed required");
    if (core_size < 0 || wing_size < 0)
        throw ContractError("config: coalition sizes must be >= 0");

    VariantFlags f = variant_flags(variant);
    if (!f.uses_filter() && k > 0)
        throw ContractError("config: variant '" + variant_to_string(variant) +
                            "' has no filter; set k=0");
    if (!f.uses_regularizer() && omega > 0.0)
        throw ContractError("config: variant '" + variant_to_string(variant) +
                            "' has no regularizer; set omega=0");
}

namespace {

std::string scope_to_string(FilterScope s) {
    switch (s) {
        case FilterScope::All: return "all";
        case FilterScope::AugmentedOnly: return "augmented-only";
        case FilterScope::OriginalsOnly: return "originals-only";
    }
    throw ContractError("unknown filter scope");
}

FilterScope scope_from_string(const std::string& s) {
    if (s == "all") return FilterScope::All;
    if (s == "augmented-only") return FilterScope::AugmentedOnly;
    if (s == "originals-only") return FilterScope::OriginalsOnly;
    throw ContractError("unknown filter scope '" + s + "'");
}

}  // namespace

std::string config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr"] = c.lr;
    j["momentum"] = c.momentum;
    j["weight_decay"] = c.weight_decay;
    j["lr_decay_factor"] = c.lr_decay_factor;
    j["lr_decay_at"] = c.lr_decay_at;
    j["omega"] = c.omega;
    j["k"] = c.k;
    j["eta"] = c.eta;
    j["meta_test_domains"] = c.meta_test_domains;
    j["core_size"] = c.core_size;
    j["wing_size"] = c.wing_size;
    j["seeds"] = c.seeds;
    j["variant"] = variant_to_string(c.variant);
    j["aug_cap"] = c.aug_cap;
    j["hidden"] = c.hidden;
    j["split_mode"] = c.split_mode == SplitMode::ByParent ? "by-parent" : "random";
    j["filter_scope"] = scope_to_string(c.filter_scope);
    j["second_order"] = c.second_order;
    return j.dump(2);
}

TrainConfig config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("config: invalid JSON: ") + e.what());
    }
    TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "epochs") c.epochs = value;
            else if (key == "batch_size") c.batch_size = value;
            else if (key == "lr") c.lr = value;
            else if (key == "momentum") c.momentum = value;
            else if (key == "weight_decay") c.weight_decay = value;
            else if (key == "lr_decay_factor") c.lr_decay_factor = value;
            else if (key == "lr_decay_at") c.lr_decay_at = value;
            else if (key == "omega") c.omega = value;
            else if (key == "k") c.k = value;
            else if (key == "eta") c.eta = value;
            else if (key == "meta_test_domains") c.meta_test_domains = value;
            else if (key == "core_size") c.core_size = value;
            else if (key == "wing_size") c.wing_size = value;
            else if (key == "seeds") c.seeds = value.get<std::vector<std::uint64_t>>();
            else if (key == "variant") c.variant = variant_from_string(value);
            else if (key == "aug_cap") c.aug_cap = value;
            else if (key == "hidden") c.hidden = value.get<std::vector<int>>();
            else if (key == "split_mode")
                c.split_mode = value == "random" ? SplitMode::Random : SplitMode::ByParent;
            else if (key == "filter_scope") c.filter_scope = scope_from_string(value);
            else if (key == "second_order") c.second_order = value;
            else throw ContractError("config: unknown field '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("config: bad field value: ") + e.what());
    }
    c.validate();
    return c;
}

// ---- evaluation ------------------------------------------------------------

double evaluate_accuracy(const MlpSpec& spec, std::span<const Tensor> params,
                         const std::vector<const Sample*>& samples) {
    if (samples.empty()) throw ContractError("evaluate_accuracy: empty sample set");
    NoGradGuard guard;
    const size_t chunk = 128;
    int correct = 0;
    for (size_t start = 0; start < samples.size(); start += chunk) {
        size_t stop = std::min(samples.size(), start + chunk);
        std::vector<const Sample*> part(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                        samples.begin() + static_cast<std::ptrdiff_t>(stop));
        Tensor logits = mlp_forward(spec, params, stack_features(part));
        const int c = spec.class_count;
        for (size_t r = 0; r < part.size(); ++r) {
            const double* row = logits.data().data() + r * static_cast<size_t>(c);
            int best = 0;
            for (int j = 1; j < c; ++j)
                if (row[j] > row[best]) best = j;
            correct += best == part[r]->label;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// ---- training loop ---------------------------------------------------------

namespace {

// Round-robin interleave across shuffled per-domain lists so every
// mini-batch spans all source domains.
std::vector<const Sample*> stratified_order(
    const std::map<int, std::vector<const Sample*>>& by_domain, Rng& rng) {
    std::vector<std::vector<const Sample*>> lists;
    for (const auto& [_, samples] : by_domain) {
        lists.push_back(samples);
        rng.shuffle(lists.back());
    }
    std::vector<const Sample*> order;
    bool any = true;
    for (size_t round = 0; any; ++round) {
        any = false;
        for (auto& list : lists) {
            if (round < list.size()) {
                order.push_back(list[round]);
                any = true;
            }
        }
    }
    return order;
}

ScoreBoard restrict_scope(const ScoreBoard& board,
                          const std::unordered_map<std::int64_t, const Sample*>& by_id,
                          FilterScope scope) {
    if (scope == FilterScope::All) return board;
    ScoreBoard out;
    for (const auto& [id, score] : board.scores) {
        Origin origin = by_id.at(id)->origin;
        bool keep = scope == FilterScope::AugmentedOnly ? origin == Origin::Augmented
                                                        : origin == Origin::Original;
        if (keep) out.scores[id] = score;
    }
    return out;
}

}  // namespace

RunResult train(const TrainConfig& config, const Dataset& data, int holdout_domain,
                std::uint64_t seed) {
    config.validate();
    if (!data.by_domain.count(holdout_domain))
        throw ContractError("train: unknown held-out domain id");

    std::map<int, std::vector<const Sample*>> sources;
    std::vector<const Sample*> holdout;
    std::unordered_set<std::int64_t> holdout_ids;
    int max_domain_id = 0;
    for (const auto& [id, dd] : data.by_domain) {
        max_domain_id = std::max(max_domain_id, id);
        for (const Sample& s : dd.samples) {
            if (id == holdout_domain) {
                holdout.push_back(&s);
                holdout_ids.insert(s.id);
            } else {
                sources[id].push_back(&s);
            }
        }
    }
    const int p = static_cast<int>(sources.size());
    if (p < 2) throw ContractError("train: need at least 2 source domains");

    const VariantFlags flags = variant_flags(config.variant);
    const bool run_game = (flags.uses_regularizer() && config.omega > 0.0) ||
                          (flags.uses_filter() && config.k > 0);
    if (run_game && config.meta_test_domains >= p)
        throw ContractError("train: V must be < number of source domains");

    size_t total_sources = 0;
    for (const auto& [_, v] : sources) total_sources += v.size();
    if (static_cast<size_t>(config.batch_size) > total_sources)
        throw ContractError("train: batch size exceeds the source pool");

    Rng master(seed);
    Rng rng_model = master.split(1);
    Rng rng_data = master.split(2);
    Rng rng_game = master.split(3);
    Rng rng_aug = master.split(4);

    MlpSpec spec{data.manifest.shape.numel(), config.hidden, data.manifest.class_count};
    ModelParams params = ModelParams::init(spec, rng_model);
    OptimizerState opt;
    opt.lr = config.lr;
    opt.momentum = config.momentum;
    opt.weight_decay = config.weight_decay;
    opt.decay_factor = config.lr_decay_factor;
    opt.decay_at = config.lr_decay_at;

    // Fixed capped pool for diversity sweeps: each augmented sample is
    // its own novel domain, generated once up front.
    std::vector<Sample> fixed_pool;
    if (flags.augment && config.aug_cap >= 0) {
        std::vector<const Sample*> flat;
        for (const auto& [_, v] : sources) flat.insert(flat.end(), v.begin(), v.end());
        for (int n = 0; n < config.aug_cap; ++n) {
            size_t i = static_cast<size_t>(rng_aug.uniform_int(flat.size()));
            size_t j = static_cast<size_t>(rng_aug.uniform_int(flat.size() - 1));
            if (j >= i) ++j;
            double lambda = rng_aug.uniform(0.0, config.eta);
            fixed_pool.push_back(amplitude_mix(*flat[i], *flat[j], lambda,
                                               kFixedPoolIdBase + n, max_domain_id + 1 + n));
        }
    }
    std::int64_t next_aug_id = kPerBatchIdBase;
    int next_aug_domain = max_domain_id + 1 + std::max(config.aug_cap, 0);

    RunResult result;
    MetricsRecord& metrics = result.metrics;

    auto cache_augmented = [&](const std::unordered_map<std::int64_t, const Sample*>& by_id,
                               const std::set<std::int64_t>& ids) {
        for (std::int64_t id : ids) {
            const Sample* s = by_id.at(id);
            if (s->origin == Origin::Augmented && metrics.aug_cache.size() < kAugCacheCap)
                metrics.aug_cache.emplace(id, *s);
        }
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double frac = static_cast<double>(epoch) / config.epochs;
        std::vector<const Sample*> order = stratified_order(sources, rng_data);
        const size_t batches = order.size() / static_cast<size_t>(config.batch_size);
        if (batches == 0) throw ContractError("train: no full batch available");

        double loss_sum = 0.0, reg_sum = 0.0;
        int clamp_active = 0, game_iters = 0, filtered = 0;

        // Fixed-pool mode: one pass over the pool per epoch, spread
        // across batches, so each augmented sample is seen as often as
        // an original regardless of N.
        std::vector<size_t> pool_order(fixed_pool.size());
        if (!fixed_pool.empty()) {
            for (size_t i = 0; i < pool_order.size(); ++i) pool_order[i] = i;
            rng_aug.shuffle(pool_order);
        }

        for (size_t b = 0; b < batches; ++b) {
            std::vector<const Sample*> batch(
                order.begin() + static_cast<std::ptrdiff_t>(b * config.batch_size),
                order.begin() + static_cast<std::ptrdiff_t>((b + 1) * config.batch_size));
            for (const Sample* s : batch)
                if (holdout_ids.count(s->id))
                    throw ContractError("train: held-out sample leaked into a batch");

            // per-batch augmentation (fresh novel domains each iteration)
            std::vector<Sample> aug_storage;
            std::vector<const Sample*> aug_ptrs;
            if (flags.augment) {
                if (config.aug_cap < 0) {
                    std::vector<Sample> values;
                    values.reserve(batch.size());
                    for (const Sample* s : batch) values.push_back(*s);
                    aug_storage = augment_batch(values, rng_aug, config.eta, next_aug_id,
                                                next_aug_domain);
                    next_aug_id += static_cast<std::int64_t>(aug_storage.size());
                    next_aug_domain += static_cast<int>(aug_storage.size());
                    for (const Sample& s : aug_storage) aug_ptrs.push_back(&s);
                } else if (!fixed_pool.empty()) {
                    size_t lo = b * pool_order.size() / batches;
                    size_t hi = (b + 1) * pool_order.size() / batches;
                    hi = std::min(hi, lo + batch.size());
                    for (size_t i = lo; i < hi; ++i)
                        aug_ptrs.push_back(&fixed_pool[pool_order[i]]);
                }
            }

            std::set<std::int64_t> discard;
            double reg_value = 0.0;
            bool reg_in_loss = false;
            Tensor reg_loss;

            if (run_game) {
                std::map<int, std::vector<const Sample*>> batch_by_domain;
                for (const Sample* s : batch) batch_by_domain[s->domain_id].push_back(s);
                if (static_cast<int>(batch_by_domain.size()) <= config.meta_test_domains)
                    throw ContractError(
                        "train: batch spans too few domains for the meta split; "
                        "increase batch size");

                MetaSplit split =
                    meta_split(batch_by_domain, aug_ptrs, config.meta_test_domains, rng_game,
                               config.split_mode == SplitMode::ByParent);
                std::vector<const Sample*> table = split.meta_train;
                table.insert(table.end(), split.meta_train_aug.begin(),
                             split.meta_train_aug.end());
                for (const Sample* s : table)
                    if (holdout_ids.count(s->id))
                        throw ContractError("train: held-out sample leaked into the game");

                const int m = static_cast<int>(table.size());
                int wing = config.wing_size > 0 ? config.wing_size
                                                : (config.batch_size + 3) / 4;
                int core = config.core_size > 0 ? config.core_size
                                                : (config.batch_size + 3) / 4;
                wing = std::min(wing, (m - 1) / 3);
                core = std::min(core, m - 2 * wing);
                if (core >= 1) {
                    GameConfig gcfg;
                    gcfg.alpha = opt.lr_at(frac);
                    gcfg.meta_test_domains = config.meta_test_domains;
                    gcfg.core_size = core;
                    gcfg.wing_size = wing;
                    gcfg.second_order = config.second_order;
                    CoalitionQuad quad = sample_coalitions(m, core, wing, rng_game);
                    MlpGameModel model(spec, params.tensors, table, split.meta_test);

                    const bool need_sm = flags.reg_sm || flags.filter_sm;
                    const bool need_maml = flags.reg_maml || flags.filter_maml;
                    RegularizerResult res_sm, res_maml;
                    if (need_sm) res_sm = supermodularity_loss(model, quad, gcfg);
                    if (need_maml) res_maml = maml_regularizer(model, quad, gcfg);

                    reg_value = need_sm ? res_sm.loss.item() : res_maml.loss.item();
                    if (need_sm && res_sm.raw_gap <= 0.0) ++clamp_active;
                    ++game_iters;

                    if (flags.uses_regularizer() && config.omega > 0.0) {
                        reg_loss = flags.reg_sm ? res_sm.loss : res_maml.loss;
                        reg_in_loss = true;
                    }
                    if (flags.uses_filter() && config.k > 0) {
                        std::unordered_map<std::int64_t, const Sample*> by_id;
                        for (const Sample* s : table) by_id[s->id] = s;
                        const Tensor& source =
                            flags.filter_sm ? res_sm.loss : res_maml.loss;
                        ScoreBoard board = restrict_scope(
                            score_samples(source, model, quad.union_st), by_id,
                            config.filter_scope);
                        discard = select_discard(board, config.k);
                        ScoreBoard negated = board;
                        for (auto& [_, s] : negated.scores) s = -s;
                        std::set<std::int64_t> bottom = select_discard(negated, config.k);
                        for (std::int64_t id : discard)
                            metrics.filter_stats.topk_count[id]++;
                        for (std::int64_t id : bottom)
                            metrics.filter_stats.bottomk_count[id]++;
                        cache_augmented(by_id, discard);
                        cache_augmented(by_id, bottom);
                        filtered += static_cast<int>(discard.size());
                    }
                }
            }

            std::vector<const Sample*> sup_batch = batch;
            sup_batch.insert(sup_batch.end(), aug_ptrs.begin(), aug_ptrs.end());
            Tensor loss = filtered_supervision(spec, params.tensors, sup_batch, discard);
            if (reg_in_loss) loss = add(loss, scale(reg_loss, config.omega));

            auto grads = backward(loss, params.tensors);
            sgd_step(params, grads, opt, frac);

            loss_sum += loss.item();
            reg_sum += reg_value;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.reg_mean = game_iters > 0 ? reg_sum / game_iters : 0.0;
        rec.clamp_active_fraction =
            game_iters > 0 ? static_cast<double>(clamp_active) / game_iters : 0.0;
        rec.filtered_count = filtered;
        rec.holdout_accuracy = evaluate_accuracy(spec, params.tensors, holdout);
        metrics.epochs.push_back(rec);
    }

    metrics.final_accuracy = metrics.epochs.back().holdout_accuracy;
    result.params = std::move(params);
    return result;
}

// ---- persistence -----------------------------------------------------------

void write_run_outputs(const TrainConfig& config, const Dataset& data, int holdout_domain,
                       std::uint64_t seed, const RunResult& result,
                       const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream csv(fs::path(out_dir) / "metrics.csv");
        csv << "epoch,train_loss,reg_mean,clamp_active_fraction,filtered_count,"
               "holdout_accuracy\n";
        for (const EpochRecord& r : result.metrics.epochs) {
            csv << r.epoch << ',' << format_double(r.train_loss) << ','
                << format_double(r.reg_mean) << ',' << format_double(r.clamp_active_fraction)
                << ',' << r.filtered_count << ',' << format_double(r.holdout_accuracy)
                << '\n';
        }
    }
    {
        nlohmann::json j;
        j["config"] = nlohmann::json::parse(config_to_json(config));
        j["dataset_seed"] = data.manifest.seed;
        j["holdout_domain"] = holdout_domain;
        j["seed"] = seed;
        j["final_accuracy"] = result.metrics.final_accuracy;
        j["epochs"] = nlohmann::json::array();
        for (const EpochRecord& r : result.metrics.epochs) {
            j["epochs"].push_back({{"epoch", r.epoch},
                                   {"train_loss", r.train_loss},
                                   {"reg_mean", r.reg_mean},
                                   {"clamp_active_fraction", r.clamp_active_fraction},
                                   {"filtered_count", r.filtered_count},
                                   {"holdout_accuracy", r.holdout_accuracy}});
        }
        j["filter_topk"] = nlohmann::json::array();
        for (const auto& [id, count] : result.metrics.filter_stats.topk_count)
            j["filter_topk"].push_back({id, count});
        j["filter_bottomk"] = nlohmann::json::array();
        for (const auto& [id, count] : result.metrics.filter_stats.bottomk_count)
            j["filter_bottomk"].push_back({id, count});
        std::ofstream out(fs::path(out_dir) / "result.json");
        out << j.dump(2) << '\n';
    }
    save_checkpoint(result.params, (fs::path(out_dir) / "checkpoint.bin").string());
}

// ---- statistics helpers ----------------------------------------------------

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
        for (size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ContractError("spearman: need two equal-length series of size >= 2");
    auto rx = average_ranks(x), ry = average_ranks(y);
    double mx = mean_of(rx), my = mean_of(ry);
    double num = 0.0, dx = 0.0, dy = 0.0;
    for (size_t i = 0; i < rx.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if (dx == 0.0 || dy == 0.0) return 0.0;  // constant series carries no ranking
    return num / std::sqrt(dx * dy);
}

int decreasing_steps(const std::vector<double>& y) {
    int count = 0;
    for (size_t i = 0; i + 1 < y.size(); ++i) count += y[i + 1] < y[i];
    return count;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ContractError("median: empty input");
    std::sort(values.begin(), values.end());
    size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---- experiments -----------------------------------------------------------

namespace {

TrainConfig config_for_variant(TrainConfig base, Variant v) {
    base.variant = v;
    VariantFlags f = variant_flags(v);
    if (!f.uses_filter()) base.k = 0;
    if (!f.uses_regularizer()) base.omega = 0.0;
    return base;
}

void write_curve_svg(const std::string& path, const std::vector<int>& ns,
                     const std::vector<double>& baseline, const std::vector<double>& dcg) {
    const double w = 480.0, h = 320.0, pad = 40.0;
    double lo = 1.0, hi = 0.0;
    for (double v : baseline) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : dcg) lo = std::min(lo, v), hi = std::max(hi, v);
    if (hi <= lo) hi = lo + 1e-6;
    auto px = [&](size_t i) {
        return pad + (w - 2 * pad) * static_cast<double>(i) /
                         std::max<size_t>(1, ns.size() - 1);
    };
    auto py = [&](double v) { return h - pad - (h - 2 * pad) * (v - lo) / (hi - lo); };
    auto poly = [&](const std::vector<double>& ys) {
        std::ostringstream pts;
        for (size_t i = 0; i < ys.size(); ++i) pts << px(i) << ',' << py(ys[i]) << ' ';
        return pts.str();
    };
    std::ofstream svg(path);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<polyline fill=\"none\" stroke=\"#888888\" stroke-width=\"2\" points=\""
        << poly(baseline) << "\"/>\n"
        << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\""
        << poly(dcg) << "\"/>\n";
    for (size_t i = 0; i < ns.size(); ++i)
        svg << "<text x=\"" << px(i) << "\" y=\"" << h - pad / 2
            << "\" font-size=\"11\" text-anchor=\"middle\">" << ns[i] << "</text>\n";
    svg << "<text x=\"" << pad << "\" y=\"" << pad / 2
        << "\" font-size=\"11\">gray: augmentation only, red: full pipeline</text>\n"
        << "</svg>\n";
}

}  // namespace

DiversityResult diversity_sweep(const TrainConfig& config, const Dataset& data,
                                int holdout_domain, const std::vector<int>& n_values,
                                const std::string& out_dir) {
    if (n_values.empty()) throw ContractError("diversity_sweep: empty N grid");
    for (size_t i = 0; i + 1 < n_values.size(); ++i)
        if (n_values[i + 1] <= n_values[i])
            throw ContractError("diversity_sweep: N values must be strictly ascending");
    if (n_values.front() < 0) throw ContractError("diversity_sweep: N must be >= 0");

    struct Job {
        std::uint64_t seed;
        size_t n_index;
        bool dcg;
        TrainConfig cfg;
    };
    std::vector<Job> jobs;
    for (std::uint64_t seed : config.seeds) {
        for (size_t ni = 0; ni < n_values.size(); ++ni) {
            const int n = n_values[ni];
            if (n == 0) {
                // no augmented domains at all: both curves degenerate
                // to plain training on originals, so run it once
                TrainConfig base = config_for_variant(config, Variant::Baseline);
                base.aug_cap = 0;
                jobs.push_back({seed, ni, false, base});
            } else {
                TrainConfig aug = config_for_variant(config, Variant::AugOnly);
                aug.aug_cap = n;
                jobs.push_back({seed, ni, false, aug});
                TrainConfig full = config_for_variant(config, Variant::FullDcg);
                full.aug_cap = n;
                full.omega = config.omega;
                full.k = config.k;
                jobs.push_back({seed, ni, true, full});
            }
        }
    }

    // Curve points are tail-averaged (mean held-out accuracy over the
    // final quarter of epochs) to damp single-epoch evaluation noise;
    // the N-effect is small relative to per-epoch jitter at this scale.
    std::vector<double> acc(jobs.size(), 0.0);
    parallel_for(jobs.size(), [&](size_t i) {
        RunResult run = train(jobs[i].cfg, data, holdout_domain, jobs[i].seed);
        const auto& epochs = run.metrics.epochs;
        size_t tail = std::max<size_t>(1, epochs.size() / 4);
        double sum = 0.0;
        for (size_t e = epochs.size() - tail; e < epochs.size(); ++e)
            sum += epochs[e].holdout_accuracy;
        acc[i] = sum / static_cast<double>(tail);
    });

    DiversityResult result;
    std::map<std::uint64_t, DiversityCurve> curves;
    for (std::uint64_t seed : config.seeds) {
        DiversityCurve c;
        c.n_values = n_values;
        c.baseline_acc.assign(n_values.size(), 0.0);
        c.dcg_acc.assign(n_values.size(), 0.0);
        curves[seed] = c;
    }
    for (size_t i = 0; i < jobs.size(); ++i) {
        DiversityCurve& c = curves[jobs[i].seed];
        if (jobs[i].dcg) {
            c.dcg_acc[jobs[i].n_index] = acc[i];
        } else {
            c.baseline_acc[jobs[i].n_index] = acc[i];
            if (n_values[jobs[i].n_index] == 0) c.dcg_acc[jobs[i].n_index] = acc[i];
        }
    }

    std::vector<double> sp_base, sp_dcg, dec_base, dec_dcg;
    std::vector<double> n_axis(n_values.begin(), n_values.end());
    for (auto& [seed, c] : curves) {
        result.per_seed.push_back(c);
        sp_base.push_back(spearman(n_axis, c.baseline_acc));
        sp_dcg.push_back(spearman(n_axis, c.dcg_acc));
        dec_base.push_back(decreasing_steps(c.baseline_acc));
        dec_dcg.push_back(decreasing_steps(c.dcg_acc));
    }
    result.baseline_spearman_median = median(sp_base);
    result.dcg_spearman_median = median(sp_dcg);
    result.baseline_decreasing_steps_median = median(dec_base);
    result.dcg_decreasing_steps_median = median(dec_dcg);

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / "sweep.csv");
        csv << "seed,n,baseline_accuracy,dcg_accuracy\n";
        size_t si = 0;
        for (const auto& [seed, c] : curves) {
            for (size_t i = 0; i < n_values.size(); ++i)
                csv << seed << ',' << n_values[i] << ',' << format_double(c.baseline_acc[i])
                    << ',' << format_double(c.dcg_acc[i]) << '\n';
            ++si;
        }
        std::vector<double> mean_base(n_values.size(), 0.0), mean_dcg(n_values.size(), 0.0);
        for (const auto& [_, c] : curves)
            for (size_t i = 0; i < n_values.size(); ++i) {
                mean_base[i] += c.baseline_acc[i] / static_cast<double>(curves.size());
                mean_dcg[i] += c.dcg_acc[i] / static_cast<double>(curves.size());
            }
        write_curve_svg((fs::path(out_dir) / "curve.svg").string(), n_values, mean_base,
                        mean_dcg);
        nlohmann::json j;
        j["baseline_spearman_median"] = result.baseline_spearman_median;
        j["dcg_spearman_median"] = result.dcg_spearman_median;
        j["baseline_decreasing_steps_median"] = result.baseline_decreasing_steps_median;
        j["dcg_decreasing_steps_median"] = result.dcg_decreasing_steps_median;
        std::ofstream out(fs::path(out_dir) / "summary.json");
        out << j.dump(2) << '\n';
    }
    return result;
}

std::vector<AblationRow> ablate(const TrainConfig& config, const Dataset& data,
                                const std::string& out_dir) {
    std::vector<int> domains;
    for (const auto& [id, _] : data.by_domain) domains.push_back(id);
    if (domains.size() < 3)
        throw ContractError("ablate: need at least 3 domains for leave-one-out");

    struct Job {
        size_t variant_index;
        int holdout;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (size_t vi = 0; vi < all_variants().size(); ++vi)
        for (int holdout : domains)
            for (std::uint64_t seed : config.seeds) jobs.push_back({vi, holdout, seed});

    std::vector<double> acc(jobs.size(), 0.0);
    parallel_for(jobs.size(), [&](size_t i) {
        TrainConfig cfg = config_for_variant(config, all_variants()[jobs[i].variant_index]);
        acc[i] = train(cfg, data, jobs[i].holdout, jobs[i].seed).metrics.final_accuracy;
    });

    std::vector<AblationRow> rows;
    for (size_t vi = 0; vi < all_variants().size(); ++vi) {
        AblationRow row;
        row.variant = all_variants()[vi];
        std::map<std::uint64_t, std::vector<double>> per_seed;  // seed -> accs over holdouts
        for (size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].variant_index != vi) continue;
            row.per_holdout_mean[jobs[i].holdout] += acc[i] / config.seeds.size();
            per_seed[jobs[i].seed].push_back(acc[i]);
        }
        std::vector<double> seed_means;
        for (const auto& [_, v] : per_seed) seed_means.push_back(mean_of(v));
        row.average = mean_of(seed_means);
        row.average_std = pop_std(seed_means);
        rows.push_back(row);
    }

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / "ablation.csv");
        csv << "variant";
        for (int d : domains) csv << ",holdout_" << d;
        csv << ",average,std\n";
        for (const AblationRow& row : rows) {
            csv << variant_to_string(row.variant);
            for (int d : domains) csv << ',' << format_double(row.per_holdout_mean.at(d));
            csv << ',' << format_double(row.average) << ',' << format_double(row.average_std)
                << '\n';
        }
    }
    return rows;
}

std::vector<SensitivityCell> sensitivity(const TrainConfig& config, const Dataset& data,
                                         int holdout_domain, const std::vector<double>& omegas,
                                         const std::vector<int>& ks,
                                         const std::string& out_dir) {
    if (omegas.empty() || ks.empty()) throw ContractError("sensitivity: empty grid");

    struct Job {
        size_t cell;
        std::uint64_t seed;
    };
    std::vector<SensitivityCell> cells;
    std::vector<Job> jobs;
    for (double omega : omegas)
        for (int k : ks) {
            for (std::uint64_t seed : config.seeds)
                jobs.push_back({cells.size(), seed});
            cells.push_back({omega, k, 0.0, 0.0});
        }

    std::vector<double> acc(jobs.size(), 0.0);
    parallel_for(jobs.size(), [&](size_t i) {
        TrainConfig cfg = config_for_variant(config, Variant::FullDcg);
        cfg.omega = cells[jobs[i].cell].omega;
        cfg.k = cells[jobs[i].cell].k;
        acc[i] = train(cfg, data, holdout_domain, jobs[i].seed).metrics.final_accuracy;
    });
    for (size_t ci = 0; ci < cells.size(); ++ci) {
        std::vector<double> v;
        for (size_t i = 0; i < jobs.size(); ++i)
            if (jobs[i].cell == ci) v.push_back(acc[i]);
        cells[ci].mean_accuracy = mean_of(v);
        cells[ci].std_accuracy = pop_std(v);
    }

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / "sensitivity.csv");
        csv << "omega,k,mean_accuracy,std_accuracy\n";
        for (const SensitivityCell& c : cells)
            csv << format_double(c.omega) << ',' << c.k << ','
                << format_double(c.mean_accuracy) << ',' << format_double(c.std_accuracy)
                << '\n';
    }
    return cells;
}

std::vector<DiscussionRow> discussion_variants(const TrainConfig& config, const Dataset& data,
                                               int holdout_domain,
                                               const std::string& out_dir) {
    TrainConfig full = config_for_variant(config, Variant::FullDcg);
    TrainConfig random_split = full;
    random_split.split_mode = SplitMode::Random;
    TrainConfig aug_only_filter = full;
    aug_only_filter.filter_scope = FilterScope::AugmentedOnly;
    TrainConfig ori_only_filter = full;
    ori_only_filter.filter_scope = FilterScope::OriginalsOnly;

    const std::vector<std::pair<std::string, TrainConfig>> setups = {
        {"full", full},
        {"random_meta_split", random_split},
        {"filter_only_on_aug", aug_only_filter},
        {"filter_only_on_ori", ori_only_filter},
    };

    struct Job {
        size_t setup;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (size_t si = 0; si < setups.size(); ++si)
        for (std::uint64_t seed : config.seeds) jobs.push_back({si, seed});

    std::vector<double> acc(jobs.size(), 0.0);
    parallel_for(jobs.size(), [&](size_t i) {
        acc[i] = train(setups[jobs[i].setup].second, data, holdout_domain, jobs[i].seed)
                     .metrics.final_accuracy;
    });

    std::vector<DiscussionRow> rows;
    for (size_t si = 0; si < setups.size(); ++si) {
        std::vector<double> v;
        for (size_t i = 0; i < jobs.size(); ++i)
            if (jobs[i].setup == si) v.push_back(acc[i]);
        rows.push_back({setups[si].first, mean_of(v), pop_std(v)});
    }

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / "discussion.csv");
        csv << "variant,mean_accuracy,std_accuracy\n";
        for (const DiscussionRow& r : rows)
            csv << r.name << ',' << format_double(r.mean_accuracy) << ','
                << format_double(r.std_accuracy) << '\n';
    }
    return rows;
}

// ---- filtered-sample dump --------------------------------------------------

namespace {

void write_image(const Sample& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    const int h = s.shape.height, w = s.shape.width, c = s.shape.channels;
    auto byte_of = [](double v) {
        int b = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        return static_cast<char>(b);
    };
    if (c == 3) {
        out << "P6\n" << w << ' ' << h << "\n255\n";
        const size_t plane = static_cast<size_t>(h) * w;
        for (size_t p = 0; p < plane; ++p)
            for (int ch = 0; ch < 3; ++ch)
                out.put(byte_of(s.features[static_cast<size_t>(ch) * plane + p]));
    } else {
        out << "P5\n" << w << ' ' << h << "\n255\n";
        for (int p = 0; p < h * w; ++p) out.put(byte_of(s.features[static_cast<size_t>(p)]));
    }
}

}  // namespace

void dump_filtered(const TrainConfig& config, const Dataset& data, int holdout_domain,
                   std::uint64_t seed, int count, const std::string& out_dir) {
    if (count < 1) throw ContractError("dump_filtered: count must be >= 1");
    RunResult run = train(config, data, holdout_domain, seed);

    std::unordered_map<std::int64_t, const Sample*> originals;
    for (const auto& [_, dd] : data.by_domain)
        for (const Sample& s : dd.samples) originals[s.id] = &s;

    auto lookup = [&](std::int64_t id) -> const Sample* {
        auto it = originals.find(id);
        if (it != originals.end()) return it->second;
        auto cached = run.metrics.aug_cache.find(id);
        return cached == run.metrics.aug_cache.end() ? nullptr : &cached->second;
    };
    auto ranked = [&](const std::map<std::int64_t, int>& counts) {
        std::vector<std::pair<std::int64_t, int>> v(counts.begin(), counts.end());
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (static_cast<int>(v.size()) > count) v.resize(static_cast<size_t>(count));
        return v;
    };

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    nlohmann::json index = nlohmann::json::array();
    auto emit = [&](const std::vector<std::pair<std::int64_t, int>>& entries,
                    const std::string& tag) {
        for (const auto& [id, n] : entries) {
            const Sample* s = lookup(id);
            if (!s) continue;  // augmented sample that fell out of the cache
            std::string name = tag + "_" + std::to_string(id) +
                               (s->shape.channels == 3 ? ".ppm" : ".pgm");
            write_image(*s, (fs::path(out_dir) / name).string());
            index.push_back({{"id", id},
                             {"domain", s->domain_id},
                             {"origin", s->origin == Origin::Augmented ? "augmented"
                                                                       : "original"},
                             {"count", n},
                             {"kind", tag},
                             {"file", name}});
        }
    };
    emit(ranked(run.metrics.filter_stats.topk_count), "top");
    emit(ranked(run.metrics.filter_stats.bottomk_count), "bottom");
    std::ofstream out(fs::path(out_dir) / "index.json");
    out << index.dump(2) << '\n';
}

}  // namespace dcg
