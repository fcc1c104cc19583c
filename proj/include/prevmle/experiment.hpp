#pragma once

// Replication harness: train at a fixed training prior, estimate the positive
// proportion of evaluation sets at priors 0.1..0.9 with the naive and the
// maximum-likelihood estimator, repeat, and summarize.
//
// Seed derivation (all via derive_seed):
//   simulation task  = derive(derive(master, key(training_prior)), repeat)
//   banknote task    = derive(derive(master, banknote_stream), repeat)
//   training data    = derive(task, 0)         (banknote re-split mode)
//   banknote split   = derive(master, 0)       (fixed-split mode)
//   held-out profile = derive(task, 1)
//   evaluation set   = derive(derive(task, 2), key(eval_prior))
// where key(p) = round(p * 1e6). Each record stores its task seed, so one
// record can be replayed from (config, training_prior, eval_prior, seed).

#include <prevmle/dataset.hpp>
#include <prevmle/density.hpp>
#include <prevmle/error.hpp>
#include <prevmle/prevalence.hpp>
#include <prevmle/random.hpp>
#include <prevmle/scorer.hpp>
#include <prevmle/synth.hpp>

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace prevmle {

inline constexpr const char* version = "0.1.0";
inline constexpr const char* simulation_experiment = "simulation";
inline constexpr const char* banknote_experiment = "banknote";

inline std::vector<double> default_eval_priors() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

enum class ProfileSource { training, held_out };
enum class NaiveRule { threshold, mean_score };

inline const char* to_string(ProfileSource s) noexcept { return s == ProfileSource::training ? "training" : "held_out"; }
inline const char* to_string(NaiveRule r) noexcept { return r == NaiveRule::threshold ? "threshold" : "mean_score"; }

/// Settings shared by both replications: how a trained scorer becomes estimates.
struct EstimatorConfig {
    std::size_t bin_count = default_bin_count;
    double pseudo_count = default_pseudo_count;
    std::size_t grid_steps = default_grid_steps;
    NaiveRule naive_rule = NaiveRule::threshold;
    double threshold = 0.5;
    ProfileSource profile_source = ProfileSource::training;
    TrainConfig train;
};

struct SimulationConfig {
    std::vector<double> training_priors{0.25, 0.5, 0.75};
    std::vector<double> eval_priors = default_eval_priors();
    std::size_t repeats = 100;
    std::size_t n = 500;         ///< training set size
    std::size_t eval_size = 500; ///< evaluation set size
    double negative_mean = 0.0;
    double positive_mean = 2.0;
    double std_dev = 1.0;
    EstimatorConfig estimator;
    std::uint64_t master_seed = 0;
    unsigned jobs = 1;
};

struct BanknoteConfig {
    std::vector<double> eval_priors = default_eval_priors();
    std::size_t repeats = 100;
    std::size_t eval_size = 500;
    std::vector<BanknoteFeature> features{BanknoteFeature::skewness, BanknoteFeature::curtosis};
    SplitConfig split; ///< seed is ignored; split seeds are derived from master_seed
    bool resplit_each_repeat = true;
    EstimatorConfig estimator;
    std::uint64_t master_seed = 0;
    unsigned jobs = 1;
};

struct EstimateRecord {
    std::string experiment_id;
    double training_prior = 0.0;
    double eval_prior = 0.0;
    std::size_t repeat_index = 0;
    std::uint64_t seed = 0;
    double naive = 0.0;
    double mle = 0.0;
    std::size_t bin_count = 0;
    std::size_t grid_steps = 0;

    bool operator==(const EstimateRecord&) const = default;
};

/// One trained model per (repeat, training prior).
struct TrainingDiagnostics {
    double training_prior = 0.0;
    std::size_t repeat_index = 0;
    std::uint64_t seed = 0;
    std::uint64_t model_fingerprint = 0;
    TrainReport report;
};

struct ReplicationResult {
    std::vector<EstimateRecord> records;
    std::vector<TrainingDiagnostics> diagnostics;

    bool any_separation_warning() const {
        return std::ranges::any_of(diagnostics, [](const auto& d) { return d.report.separation_warning; });
    }
};

enum class Estimator { naive, mle };
inline const char* to_string(Estimator e) noexcept { return e == Estimator::naive ? "naive" : "mle"; }

struct CellSummary {
    std::string experiment_id;
    double training_prior = 0.0;
    double eval_prior = 0.0;
    Estimator estimator = Estimator::mle;
    double mean = 0.0;
    double lo95 = 0.0;
    double hi95 = 0.0;
    std::size_t n_repeats = 0;
};

namespace detail {

inline std::uint64_t prior_key(double p) { return static_cast<std::uint64_t>(std::llround(p * 1e6)); }

inline void check_estimator_config(const EstimatorConfig& c) {
    require(c.bin_count >= 1, Errc::invalid_argument, "bin_count must be at least 1");
    require(c.grid_steps >= 2, Errc::invalid_argument, "grid_steps must be at least 2");
    require(c.pseudo_count >= 0.0 && std::isfinite(c.pseudo_count), Errc::invalid_argument,
            "pseudo_count must be finite and non-negative");
}

inline void check_priors(std::span<const double> priors, const char* what) {
    require(!priors.empty(), Errc::invalid_argument, fmt::format("{} must not be empty", what));
    for (double p : priors) {
        require(p >= 0.0 && p <= 1.0, Errc::out_of_range, fmt::format("{} must lie in [0, 1]", what));
    }
}

/// Runs fn(0..count-1) on up to `jobs` threads. The lowest-index failure is rethrown.
inline void run_parallel(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Train, fit the score profile, then estimate every requested evaluation set.
struct TaskOutput {
    std::vector<EstimateRecord> records;
    TrainingDiagnostics diagnostics;
};

template <typename EvalSetFn>
TaskOutput run_task(const char* experiment_id, double training_prior, std::size_t repeat, std::uint64_t task_seed,
                    std::span<const LabeledSample> train, std::span<const LabeledSample> profile_samples,
                    std::span<const double> eval_priors, const EstimatorConfig& est, EvalSetFn&& eval_set) {
    double current_eval = -1.0;
    try {
        const auto fit = train_logistic(train, est.train);
        const auto profile_scores = predict_scores(fit.model, profile_samples);
        const auto profile = fit_profile(label_scores(profile_scores, profile_samples), est.bin_count, est.pseudo_count);

        TaskOutput out;
        out.diagnostics = {training_prior, repeat, task_seed, fingerprint(fit.model), fit.report};
        for (double pi : eval_priors) {
            current_eval = pi;
            const auto eval = eval_set(pi, derive_seed(derive_seed(task_seed, 2), prior_key(pi)));
            const auto scores = predict_scores(fit.model, eval);
            EstimateRecord r;
            r.experiment_id = experiment_id;
            r.training_prior = training_prior;
            r.eval_prior = pi;
            r.repeat_index = repeat;
            r.seed = task_seed;
            r.naive = est.naive_rule == NaiveRule::threshold ? naive_estimate(scores, est.threshold)
                                                             : mean_score_estimate(scores);
            r.mle = mle_grid(profile, scores, est.grid_steps).estimate.pi_hat;
            r.bin_count = est.bin_count;
            r.grid_steps = est.grid_steps;
            out.records.push_back(std::move(r));
        }
        return out;
    } catch (const Error& e) {
        const std::string eval = current_eval < 0.0 ? std::string("(training)") : fmt::format("{}", current_eval);
        throw Error(e.code(), fmt::format("{} repeat {}, training prior {}, eval prior {}: {}", experiment_id, repeat,
                                          training_prior, eval, e.what()));
    }
}

inline void sort_records(std::vector<EstimateRecord>& records) {
    std::ranges::sort(records, [](const EstimateRecord& a, const EstimateRecord& b) {
        return std::tie(a.experiment_id, a.training_prior, a.eval_prior, a.repeat_index) <
               std::tie(b.experiment_id, b.training_prior, b.eval_prior, b.repeat_index);
    });
}

inline ReplicationResult collect(std::vector<TaskOutput>& outputs) {
    ReplicationResult result;
    for (auto& o : outputs) {
        result.records.insert(result.records.end(), std::make_move_iterator(o.records.begin()),
                              std::make_move_iterator(o.records.end()));
        result.diagnostics.push_back(o.diagnostics);
    }
    sort_records(result.records);
    std::ranges::sort(result.diagnostics, [](const auto& a, const auto& b) {
        return std::tie(a.training_prior, a.repeat_index) < std::tie(b.training_prior, b.repeat_index);
    });
    return result;
}

inline TaskOutput simulation_task(const SimulationConfig& config, double training_prior, std::size_t repeat,
                                  std::uint64_t task_seed, std::span<const double> eval_priors) {
    GaussianPairConfig gauss{config.negative_mean, config.positive_mean, config.std_dev, derive_seed(task_seed, 0)};
    const auto train = generate(gauss, config.n, training_prior);
    std::vector<LabeledSample> held_out;
    if (config.estimator.profile_source == ProfileSource::held_out) {
        gauss.seed = derive_seed(task_seed, 1);
        held_out = generate(gauss, config.n, training_prior);
    }
    const std::span<const LabeledSample> profile_samples =
        config.estimator.profile_source == ProfileSource::held_out ? std::span<const LabeledSample>(held_out)
                                                                   : std::span<const LabeledSample>(train);
    return run_task(simulation_experiment, training_prior, repeat, task_seed, train, profile_samples, eval_priors,
                    config.estimator, [&](double pi, std::uint64_t seed) {
                        GaussianPairConfig g{config.negative_mean, config.positive_mean, config.std_dev, seed};
                        return generate(g, config.eval_size, pi);
                    });
}

inline std::uint64_t simulation_task_seed(std::uint64_t master, double training_prior, std::size_t repeat) {
    return derive_seed(derive_seed(master, prior_key(training_prior)), repeat);
}

inline constexpr std::uint64_t banknote_stream = 0xb4a7'0000'0000'0001ULL;

inline std::uint64_t banknote_task_seed(std::uint64_t master, std::size_t repeat) {
    return derive_seed(derive_seed(master, banknote_stream), repeat);
}

inline double banknote_training_prior(const BanknoteConfig& config) {
    return static_cast<double>(config.split.train_positives) / static_cast<double>(config.split.train_total);
}

inline std::vector<LabeledSample> calibration_draw(std::span<const LabeledSample> holdout, const SplitConfig& counts,
                                                   std::uint64_t seed) {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < holdout.size(); ++i) {
        (holdout[i].label == Label::positive ? pos : neg).push_back(i);
    }
    require(pos.size() >= counts.train_positives && neg.size() >= counts.train_negatives, Errc::insufficient_records,
            "holdout too small for a held-out profile of the training class counts");
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(pos));
    rng.shuffle(std::span<std::size_t>(neg));
    std::vector<LabeledSample> out;
    for (std::size_t i = 0; i < counts.train_positives; ++i) out.push_back(holdout[pos[i]]);
    for (std::size_t i = 0; i < counts.train_negatives; ++i) out.push_back(holdout[neg[i]]);
    return out;
}

inline TaskOutput banknote_task(std::span<const BanknoteRecord> data, const BanknoteConfig& config,
                                std::size_t repeat, std::uint64_t task_seed, std::span<const double> eval_priors) {
    SplitConfig split_config = config.split;
    split_config.seed = config.resplit_each_repeat ? derive_seed(task_seed, 0) : derive_seed(config.master_seed, 0);
    const auto split = make_train_split(data, split_config);
    const auto train = select_features(split.train, config.features);
    const auto holdout = select_features(split.holdout, config.features);
    std::vector<LabeledSample> calibration;
    if (config.estimator.profile_source == ProfileSource::held_out) {
        calibration = calibration_draw(holdout, config.split, derive_seed(task_seed, 1));
    }
    const std::span<const LabeledSample> profile_samples =
        config.estimator.profile_source == ProfileSource::held_out ? std::span<const LabeledSample>(calibration)
                                                                   : std::span<const LabeledSample>(train);
    return run_task(banknote_experiment, banknote_training_prior(config), repeat, task_seed, train, profile_samples,
                    eval_priors, config.estimator, [&](double pi, std::uint64_t seed) {
                        return make_eval_set(holdout, pi, config.eval_size, seed);
                    });
}

inline void check_banknote_config(const BanknoteConfig& config) {
    check_estimator_config(config.estimator);
    check_priors(config.eval_priors, "eval_priors");
    require(config.repeats >= 1, Errc::invalid_argument, "repeats must be at least 1");
    require(config.eval_size >= 1, Errc::invalid_argument, "eval_size must be at least 1");
    require(!config.features.empty(), Errc::invalid_argument, "select at least one feature");
    require(config.split.train_positives + config.split.train_negatives == config.split.train_total,
            Errc::invalid_argument, "train_positives + train_negatives must equal train_total");
}

} // namespace detail

inline ReplicationResult run_simulation_replication(const SimulationConfig& config) {
    detail::check_estimator_config(config.estimator);
    detail::check_priors(config.training_priors, "training_priors");
    detail::check_priors(config.eval_priors, "eval_priors");
    detail::require(config.repeats >= 1, Errc::invalid_argument, "repeats must be at least 1");
    detail::require(config.n >= 1 && config.eval_size >= 1, Errc::invalid_argument, "set sizes must be at least 1");

    const std::size_t priors = config.training_priors.size();
    std::vector<detail::TaskOutput> outputs(priors * config.repeats);
    detail::run_parallel(outputs.size(), config.jobs, [&](std::size_t i) {
        const double prior = config.training_priors[i % priors];
        const std::size_t repeat = i / priors;
        const auto seed = detail::simulation_task_seed(config.master_seed, prior, repeat);
        outputs[i] = detail::simulation_task(config, prior, repeat, seed, config.eval_priors);
    });
    return detail::collect(outputs);
}

/// Recomputes one simulation record from its stored coordinates and seed.
inline EstimateRecord replay_simulation_record(const SimulationConfig& config, const EstimateRecord& record) {
    const double eval[] = {record.eval_prior};
    return detail::simulation_task(config, record.training_prior, record.repeat_index, record.seed, eval).records.front();
}

inline ReplicationResult run_banknote_replication(std::span<const BanknoteRecord> data, const BanknoteConfig& config) {
    detail::check_banknote_config(config);
    detail::require(!data.empty(), Errc::empty_input, "banknote data is empty");
    std::vector<detail::TaskOutput> outputs(config.repeats);
    detail::run_parallel(outputs.size(), config.jobs, [&](std::size_t repeat) {
        const auto seed = detail::banknote_task_seed(config.master_seed, repeat);
        outputs[repeat] = detail::banknote_task(data, config, repeat, seed, config.eval_priors);
    });
    return detail::collect(outputs);
}

inline EstimateRecord replay_banknote_record(std::span<const BanknoteRecord> data, const BanknoteConfig& config,
                                             const EstimateRecord& record) {
    detail::check_banknote_config(config);
    const double eval[] = {record.eval_prior};
    return detail::banknote_task(data, config, record.repeat_index, record.seed, eval).records.front();
}

/// Linear interpolation between order statistics (numpy's default rule):
/// position h = (n - 1) * q, value = x[floor h] + (h - floor h) * (x[floor h + 1] - x[floor h]).
inline double empirical_quantile(std::span<const double> sorted, double q) {
    detail::require(!sorted.empty(), Errc::empty_input, "quantile of no values");
    detail::require(q >= 0.0 && q <= 1.0, Errc::out_of_range, "quantile level must lie in [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Per (experiment, training prior, eval prior, estimator): mean and central `level` interval.
inline std::vector<CellSummary> summarize(std::span<const EstimateRecord> records, double level = 0.95) {
    detail::require(!records.empty(), Errc::empty_input, "no records to summarize");
    detail::require(level > 0.0 && level < 1.0, Errc::out_of_range, "interval level must lie in (0, 1)");
    using Key = std::tuple<std::string, double, double>;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> cells;
    for (const auto& r : records) {
        auto& cell = cells[{r.experiment_id, r.training_prior, r.eval_prior}];
        cell.first.push_back(r.naive);
        cell.second.push_back(r.mle);
    }
    std::vector<CellSummary> out;
    const double tail = (1.0 - level) / 2.0;
    for (auto& [key, values] : cells) {
        const auto& [id, train_prior, eval_prior] = key;
        for (auto estimator : {Estimator::naive, Estimator::mle}) {
            auto& v = estimator == Estimator::naive ? values.first : values.second;
            detail::require(v.size() >= 2, Errc::undersized_cell,
                            fmt::format("cell ({}, training prior {}, eval prior {}) has {} record(s), need at least 2",
                                        id, train_prior, eval_prior, v.size()));
            std::ranges::sort(v);
            // Neumaier summation; a constant cell then averages back to that constant
            double total = 0.0;
            double carry = 0.0;
            for (double x : v) {
                const double t = total + x;
                carry += std::abs(total) >= std::abs(x) ? (total - t) + x : (x - t) + total;
                total = t;
            }
            out.push_back({id, train_prior, eval_prior, estimator, (total + carry) / static_cast<double>(v.size()),
                           empirical_quantile(v, tail), empirical_quantile(v, 1.0 - tail), v.size()});
        }
    }
    return out;
}

inline void write_records_csv(std::ostream& out, std::span<const EstimateRecord> records) {
    out << "experiment_id,training_prior,eval_prior,repeat_index,seed,naive,mle,bin_count,grid_steps\n";
    for (const auto& r : records) {
        out << fmt::format("{},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{},{}\n", r.experiment_id, r.training_prior,
                           r.eval_prior, r.repeat_index, r.seed, r.naive, r.mle, r.bin_count, r.grid_steps);
    }
}

inline void write_summary_csv(std::ostream& out, std::span<const CellSummary> cells) {
    out << "experiment_id,training_prior,eval_prior,estimator,mean,lo95,hi95,n_repeats\n";
    for (const auto& c : cells) {
        out << fmt::format("{},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{}\n", c.experiment_id, c.training_prior,
                           c.eval_prior, to_string(c.estimator), c.mean, c.lo95, c.hi95, c.n_repeats);
    }
}

inline nlohmann::json to_json(const EstimatorConfig& c) {
    return {{"bin_count", c.bin_count},
            {"pseudo_count", c.pseudo_count},
            {"grid_steps", c.grid_steps},
            {"naive_rule", to_string(c.naive_rule)},
            {"threshold", c.threshold},
            {"profile_source", to_string(c.profile_source)},
            {"train", {{"max_iterations", c.train.max_iterations},
                       {"tolerance", c.train.tolerance},
                       {"l2_penalty", c.train.l2_penalty}}}};
}

inline nlohmann::json to_json(const SimulationConfig& c) {
    return {{"training_priors", c.training_priors},
            {"eval_priors", c.eval_priors},
            {"repeats", c.repeats},
            {"n", c.n},
            {"eval_size", c.eval_size},
            {"negative_mean", c.negative_mean},
            {"positive_mean", c.positive_mean},
            {"std_dev", c.std_dev},
            {"estimator", to_json(c.estimator)},
            {"master_seed", c.master_seed},
            {"jobs", c.jobs}};
}

inline nlohmann::json to_json(const BanknoteConfig& c) {
    std::vector<std::string> features;
    for (auto f : c.features) {
        features.emplace_back(to_string(f));
    }
    return {{"eval_priors", c.eval_priors},
            {"repeats", c.repeats},
            {"eval_size", c.eval_size},
            {"features", features},
            {"split", {{"train_total", c.split.train_total},
                       {"train_positives", c.split.train_positives},
                       {"train_negatives", c.split.train_negatives},
                       {"mode", c.resplit_each_repeat ? "resplit" : "fixed"}}},
            {"estimator", to_json(c.estimator)},
            {"master_seed", c.master_seed},
            {"jobs", c.jobs}};
}

/// Counts and warnings from a run, for the metadata file.
inline nlohmann::json run_summary_json(const ReplicationResult& result) {
    std::size_t warnings = 0;
    std::size_t unconverged = 0;
    for (const auto& d : result.diagnostics) {
        warnings += d.report.separation_warning ? 1 : 0;
        unconverged += d.report.converged ? 0 : 1;
    }
    return {{"records", result.records.size()},
            {"trained_models", result.diagnostics.size()},
            {"separation_warning", warnings > 0},
            {"separation_warning_count", warnings},
            {"unconverged_count", unconverged}};
}

} // namespace prevmle
