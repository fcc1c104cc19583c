// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--seed S]            simulation and numerical criteria
//   acceptance --banknote <file>     banknote criteria (exit 77 when no file is given)

#include <prevmle/prevmle.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace prevmle;

namespace {

constexpr int exit_skipped = 77;

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    fmt::print("{} {}: {}\n", pass ? "PASS" : "FAIL", name, detail);
    std::fflush(stdout);
    failures += pass ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const CellSummary& find_cell(const std::vector<CellSummary>& cells, double train, double eval, Estimator e) {
    for (const auto& c : cells) {
        if (c.training_prior == train && c.eval_prior == eval && c.estimator == e) return c;
    }
    throw std::runtime_error(fmt::format("no cell for training prior {} eval prior {}", train, eval));
}

std::string records_csv(const ReplicationResult& r) {
    std::ostringstream out;
    write_records_csv(out, r.records);
    return out.str();
}

// Random masses with every entry positive, as a smoothed histogram would have.
std::vector<double> random_smoothed_masses(Rng& rng, std::size_t bins) {
    std::vector<double> counts(bins);
    const double pseudo = 0.1 + rng.uniform01();
    for (auto& c : counts) c = static_cast<double>(rng.below(200)) + pseudo;
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    for (auto& c : counts) c /= total;
    return counts;
}

std::vector<double> random_bag(Rng& rng, std::size_t size) {
    std::vector<double> scores(size);
    const double skew = 0.2 + 2.0 * rng.uniform01();
    for (auto& s : scores) s = std::pow(rng.uniform01(), skew);
    return scores;
}

// Straight evaluation of sum_k c_k log(pi p_k + (1 - pi) q_k) on a fine grid.
double brute_force_argmax(const std::vector<double>& pos, const std::vector<double>& neg,
                          const std::vector<std::size_t>& counts, std::size_t points) {
    double best = -INFINITY;
    double best_pi = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double pi = static_cast<double>(i) / static_cast<double>(points - 1);
        double ll = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] == 0) continue;
            ll += static_cast<double>(counts[k]) * std::log(pi * pos[k] + (1.0 - pi) * neg[k]);
        }
        if (ll > best) {
            best = ll;
            best_pi = pi;
        }
    }
    return best_pi;
}

std::size_t count_local_maxima(const std::vector<double>& ll) {
    // collapse plateaus, then count interior or edge peaks
    std::vector<double> runs;
    for (double v : ll) {
        if (runs.empty() || v != runs.back()) runs.push_back(v);
    }
    std::size_t peaks = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const bool left = i == 0 || runs[i] > runs[i - 1];
        const bool right = i + 1 == runs.size() || runs[i] > runs[i + 1];
        peaks += left && right ? 1 : 0;
    }
    return peaks;
}

void simulation_criteria(std::uint64_t seed) {
    SimulationConfig config;
    config.master_seed = seed;

    const auto start = std::chrono::steady_clock::now();
    const auto first = run_simulation_replication(config);
    const double elapsed = seconds_since(start);
    const auto cells = summarize(first.records);

    // 0.25 and 0.75 are not on the default evaluation grid; run those cells with the same defaults
    SimulationConfig off_grid = config;
    off_grid.training_priors = {0.25, 0.75};
    off_grid.eval_priors = {0.25, 0.75};
    const auto bias_cells = summarize(run_simulation_replication(off_grid).records);
    const auto& up = find_cell(bias_cells, 0.25, 0.75, Estimator::naive);
    const auto& down = find_cell(bias_cells, 0.75, 0.25, Estimator::naive);
    const bool biased = std::abs(up.mean - 0.75) > 0.05 && std::abs(down.mean - 0.25) > 0.05;
    report(biased, "naive bias",
           fmt::format("trained 0.25 -> true 0.75: mean {:.4f} (|dev| {:.4f}); trained 0.75 -> true 0.25: mean {:.4f} "
                       "(|dev| {:.4f}); need both > 0.05",
                       up.mean, std::abs(up.mean - 0.75), down.mean, std::abs(down.mean - 0.25)));
    report(elapsed < 300.0, "simulation runtime", fmt::format("{:.1f} s for {} records; need < 300 s", elapsed,
                                                              first.records.size()));

    std::size_t centered = 0;
    std::size_t covered = 0;
    double worst = 0.0;
    std::size_t total = 0;
    for (const auto& c : cells) {
        if (c.estimator != Estimator::mle) continue;
        ++total;
        const double dev = std::abs(c.mean - c.eval_prior);
        worst = std::max(worst, dev);
        centered += dev <= 0.05 ? 1 : 0;
        covered += c.lo95 <= c.eval_prior && c.eval_prior <= c.hi95 ? 1 : 0;
    }
    report(total == 27 && centered == 27, "mle centering",
           fmt::format("{}/{} cells within 0.05 of the true proportion (worst |dev| {:.4f})", centered, total, worst));
    report(total == 27 && covered >= 24, "mle interval coverage",
           fmt::format("95% interval contains the true proportion in {}/{} cells; need >= 24", covered, total));

    const auto second = run_simulation_replication(config);
    const auto a = records_csv(first);
    const auto b = records_csv(second);
    report(a == b, "determinism",
           fmt::format("two runs with seed {}: records CSV {} ({} bytes, sha256 {})", seed,
                       a == b ? "byte-identical" : "differs", a.size(), sha256_hex(a).substr(0, 16)));
}

void likelihood_oracle(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 11));
    const std::size_t instances = 100;
    std::size_t agree = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t bins = 2 + rng.below(9);
        const auto pos = random_smoothed_masses(rng, bins);
        const auto neg = random_smoothed_masses(rng, bins);
        const ScoreProfile profile(BinnedDensity::from_masses(pos), BinnedDensity::from_masses(neg));
        const auto bag = random_bag(rng, 20 + rng.below(500));
        const auto coarse = mle_grid(profile, bag, 1001).estimate.pi_hat;
        const auto fine = brute_force_argmax(pos, neg, bin_counts(bag, bins), 1000001);
        const double gap = std::abs(coarse - fine);
        worst = std::max(worst, gap);
        agree += gap <= 0.001 + 1e-12 ? 1 : 0;
    }
    report(agree == instances, "likelihood oracle",
           fmt::format("{}/{} instances: 1001-point argmax within 0.001 of 10^6-point brute force (worst {:.2e})",
                       agree, instances, worst));
}

void unimodality(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 12));
    const std::size_t instances = 1000;
    std::size_t single = 0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t bins = 1 + rng.below(20);
        const ScoreProfile profile(BinnedDensity::from_masses(random_smoothed_masses(rng, bins)),
                                   BinnedDensity::from_masses(random_smoothed_masses(rng, bins)));
        const auto bag = random_bag(rng, 1 + rng.below(1000));
        const auto curve = mle_grid(profile, bag, 1001).curve;
        single += count_local_maxima(curve.log_likelihood) == 1 ? 1 : 0;
    }
    report(single == instances, "unimodality",
           fmt::format("{}/{} random profiles and bags have exactly one local maximum", single, instances));
}

void gradient_check(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 13));
    const std::size_t instances = 100;
    const double h = 1e-6;
    std::size_t ok = 0;
    double worst = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t n = 5 + rng.below(40);
        const std::size_t d = 1 + rng.below(4);
        std::vector<LabeledSample> data(n);
        for (std::size_t i = 0; i < n; ++i) {
            data[i].label = i < 2 ? (i == 0 ? Label::positive : Label::negative)
                                  : (rng.below(2) == 1 ? Label::positive : Label::negative);
            for (std::size_t j = 0; j < d; ++j) data[i].features.push_back(rng.normal(0.0, 1.0 + 3.0 * rng.uniform01()));
        }
        LogisticModel model;
        model.weights.resize(d);
        fit_standardization(data, model);
        for (auto& w : model.weights) w = rng.normal();
        model.intercept = rng.normal();
        const double l2 = rng.uniform01() < 0.5 ? 0.0 : 0.1 * rng.uniform01();

        const auto analytic = logistic_loss_gradient(model, data, l2);
        double diff = 0.0;
        double norm = 0.0;
        for (std::size_t k = 0; k <= d; ++k) {
            auto plus = model;
            auto minus = model;
            (k == 0 ? plus.intercept : plus.weights[k - 1]) += h;
            (k == 0 ? minus.intercept : minus.weights[k - 1]) -= h;
            const double numeric = (logistic_loss(plus, data, l2) - logistic_loss(minus, data, l2)) / (2.0 * h);
            diff += (analytic[k] - numeric) * (analytic[k] - numeric);
            norm += numeric * numeric;
        }
        const double rel = std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
        worst = std::max(worst, rel);
        ok += rel < 1e-5 ? 1 : 0;
    }
    report(ok == instances, "gradient check",
           fmt::format("{}/{} instances with relative error < 1e-5 (worst {:.2e})", ok, instances, worst));
}

void normalization(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 14));
    const std::size_t instances = 1000;
    double worst_density = 0.0;
    double worst_mixture = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
        const std::size_t bins = 1 + rng.below(50);
        const double pseudo = t % 3 == 0 ? 0.0 : 2.0 * rng.uniform01();
        std::vector<LabeledScore> scores(1 + rng.below(2000));
        for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = {std::pow(rng.uniform01(), 0.3 + 3.0 * rng.uniform01()),
                         i == 0 ? Label::positive : (i == 1 || rng.below(2) == 0 ? Label::negative : Label::positive)};
        }
        if (scores.size() < 2) scores.push_back({0.5, Label::negative});
        const auto profile = fit_profile(scores, bins, pseudo);
        for (const auto* d : {&profile.positive(), &profile.negative()}) {
            const auto m = d->masses();
            worst_density = std::max(worst_density, std::abs(std::accumulate(m.begin(), m.end(), 0.0) - 1.0));
        }
        for (double pi : {0.0, 0.5, 1.0}) {
            double total = 0.0;
            for (std::size_t k = 0; k < bins; ++k) {
                total += score_mass(profile, (static_cast<double>(k) + 0.5) / static_cast<double>(bins), pi);
            }
            worst_mixture = std::max(worst_mixture, std::abs(total - 1.0));
        }
    }
    report(worst_density <= 1e-12, "density normalization",
           fmt::format("{} fitted profiles: worst |sum - 1| = {:.2e}; need <= 1e-12", instances, worst_density));
    report(worst_mixture <= 1e-12, "mixture normalization",
           fmt::format("pi in {{0, 0.5, 1}}: worst |sum over bins - 1| = {:.2e}; need <= 1e-12", worst_mixture));
}

int banknote_criteria(const std::string& path, std::uint64_t seed) {
    if (path.empty() || !std::filesystem::exists(path)) {
        fmt::print("NOT RUN banknote replication: no data file{} (configure with -DPREVMLE_BANKNOTE_DATA=<file>)\n",
                   path.empty() ? "" : " at " + path);
        return exit_skipped;
    }
    const auto data = load_banknote_file(path);
    BanknoteConfig config;
    config.master_seed = seed;
    const auto result = run_banknote_replication(data, config);
    const auto cells = summarize(result.records);

    std::size_t centered = 0;
    double worst = 0.0;
    std::string naive_detail;
    bool extremes_biased = true;
    for (const auto& c : cells) {
        const double dev = std::abs(c.mean - c.eval_prior);
        if (c.estimator == Estimator::mle) {
            worst = std::max(worst, dev);
            centered += dev <= 0.05 ? 1 : 0;
        } else if (c.eval_prior == 0.1 || c.eval_prior == 0.9) {
            extremes_biased = extremes_biased && dev > 0.05;
            naive_detail += fmt::format(" true {} -> mean {:.4f};", c.eval_prior, c.mean);
        }
    }
    report(centered == 9, "banknote mle centering",
           fmt::format("{}/9 eval priors within 0.05 (worst |dev| {:.4f})", centered, worst));
    report(extremes_biased, "banknote naive bias", "naive at the extreme priors:" + naive_detail + " need |dev| > 0.05");
    if (result.any_separation_warning()) {
        fmt::print("note: logistic training reported a separation warning\n");
    }

    // soft check: reported, never fatal
    const auto split = make_train_split(data, {.seed = derive_seed(seed, 0)});
    const auto train = select_features(split.train, config.features);
    const auto fit = train_logistic(train);
    const auto labeled = label_scores(predict_scores(fit.model, train), train);
    const std::vector<std::size_t> candidates{2, 3, 5, 10, 20};
    const auto search = search_bins(labeled, candidates, {.seed = seed});
    std::string errors;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        errors += fmt::format(" N={}: {:.4f};", candidates[i], search.mean_abs_error[i]);
    }
    fmt::print("{} banknote bin search (soft): selected N={} (expected 3);{}\n", search.chosen == 3 ? "PASS" : "SOFT-FAIL",
               search.chosen, errors);
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    std::uint64_t seed = 1;
    bool banknote = false;
    std::string banknote_path;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--seed" && i + 1 < argc) {
            seed = std::stoull(argv[++i]);
        } else if (arg == "--banknote") {
            banknote = true;
            banknote_path = i + 1 < argc ? argv[++i] : "";
        } else {
            fmt::print(stderr, "usage: acceptance [--seed S] [--banknote <file>]\n");
            return 2;
        }
    }
    try {
        if (banknote) {
            return banknote_criteria(banknote_path, seed);
        }
        likelihood_oracle(seed);
        unimodality(seed);
        gradient_check(seed);
        normalization(seed);
        simulation_criteria(seed);
        fmt::print("note: built and run without the plotting component\n");
    } catch (const std::exception& e) {
        fmt::print("FAIL acceptance aborted: {}\n", e.what());
        return 1;
    }
    fmt::print("{} criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
