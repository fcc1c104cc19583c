#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime or data failure,
// 2 argument error.

#include <prevmle/prevmle.hpp>

#include <CLI11.hpp>
#include <curl/curl.h>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace prevmle::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_failure = 1;
inline constexpr int exit_usage = 2;

inline constexpr const char* banknote_url =
    "https://archive.ics.uci.edu/ml/machine-learning-databases/00267/data_banknote_authentication.txt";

namespace fs = std::filesystem;

struct SeedOption {
    std::uint64_t value = 0;
    bool from_user = false;

    void resolve() {
        if (!from_user) {
            std::random_device rd;
            value = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        }
    }

    nlohmann::json json() const { return {{"seed", value}, {"seed_source", from_user ? "user" : "entropy"}}; }
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    detail::require(static_cast<bool>(out), Errc::io_error, "cannot write " + path.string());
    out << text;
    detail::require(static_cast<bool>(out), Errc::io_error, "failed writing " + path.string());
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    detail::require(static_cast<bool>(in), Errc::io_error, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline fs::path prepare_output_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    detail::require(!ec && fs::is_directory(p), Errc::io_error, "cannot create output directory " + dir);
    return p;
}

inline nlohmann::json base_metadata(const std::string& command) {
    return {{"command", command}, {"version", version}};
}

/// One score per line, each in [0, 1]. Blank lines are skipped.
inline std::vector<double> read_scores(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), Errc::io_error, "cannot open scores file " + path);
    std::vector<double> scores;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto text = detail::trim(line);
        if (text.empty()) {
            continue;
        }
        double v = 0.0;
        detail::require(detail::parse_double(text, v), Errc::malformed_input,
                        fmt::format("{} line {}: not a number", path, row));
        detail::require(v >= 0.0 && v <= 1.0, Errc::out_of_range,
                        fmt::format("{} line {}: score {} outside [0, 1]", path, row, v));
        scores.push_back(v);
    }
    detail::require(!scores.empty(), Errc::empty_input, path + ": no scores");
    return scores;
}

/// Rows `x1,...,xd,label` with label 0 or 1; an optional header line.
inline std::vector<LabeledSample> read_labeled_csv(const std::string& path, bool header) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), Errc::io_error, "cannot open data file " + path);
    std::vector<LabeledSample> samples;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto text = detail::trim(line);
        if (text.empty() || (header && row == 1)) {
            continue;
        }
        const auto fields = detail::split_commas(text);
        detail::require(fields.size() >= 2, Errc::malformed_input,
                        fmt::format("{} line {}: need at least one feature and a label", path, row));
        LabeledSample s;
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
            double v = 0.0;
            detail::require(detail::parse_double(fields[i], v) && std::isfinite(v), Errc::malformed_input,
                            fmt::format("{} line {}: column {} is not a finite number", path, row, i + 1));
            s.features.push_back(v);
        }
        const auto label = detail::trim(fields.back());
        detail::require(label == "0" || label == "1", Errc::malformed_input,
                        fmt::format("{} line {}: label must be 0 or 1", path, row));
        s.label = label == "1" ? Label::positive : Label::negative;
        detail::require(samples.empty() || samples.front().features.size() == s.features.size(),
                        Errc::malformed_input, fmt::format("{} line {}: inconsistent column count", path, row));
        samples.push_back(std::move(s));
    }
    detail::require(!samples.empty(), Errc::empty_input, path + ": no samples");
    return samples;
}

inline std::vector<LabeledScore> read_labeled_scores(const std::string& path, bool header) {
    const auto rows = read_labeled_csv(path, header);
    std::vector<LabeledScore> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        detail::require(rows[i].features.size() == 1, Errc::malformed_input,
                        path + ": expected rows of the form score,label");
        const double b = rows[i].features[0];
        detail::require(b >= 0.0 && b <= 1.0, Errc::out_of_range, fmt::format("{}: score {} outside [0, 1]", path, b));
        out.push_back({b, rows[i].label});
    }
    return out;
}

inline void fetch_file(const std::string& url, const fs::path& dest) {
    const fs::path partial = dest.string() + ".part";
    FILE* file = std::fopen(partial.c_str(), "wb");
    detail::require(file != nullptr, Errc::io_error, "cannot write " + partial.string());
    CURL* curl = curl_easy_init();
    if (curl == nullptr) {
        std::fclose(file);
        throw Error(Errc::io_error, "cannot initialise libcurl");
    }
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, file);
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    std::fclose(file);
    if (rc != CURLE_OK) {
        fs::remove(partial);
        throw Error(Errc::io_error, fmt::format("download of {} failed: {}", url, curl_easy_strerror(rc)));
    }
    fs::rename(partial, dest);
}

inline fs::path checksum_sidecar(const fs::path& data) { return data.string() + ".sha256"; }

/// Makes sure the dataset exists (fetching it if allowed) and matches its recorded checksum.
/// Returns the file's SHA-256.
inline std::string ensure_dataset(const std::string& path, bool fetch, const std::string& url,
                                  const std::string& expected_flag) {
    const fs::path data(path);
    if (!fs::exists(data)) {
        detail::require(fetch, Errc::io_error, "banknote data file not found: " + path + " (pass --fetch to download)");
        fetch_file(url, data);
        write_text(checksum_sidecar(data), sha256_file(path) + "\n");
    }
    const std::string actual = sha256_file(path);
    std::string expected = expected_flag;
    if (expected.empty() && fs::exists(checksum_sidecar(data))) {
        expected = std::string(detail::trim(read_text(checksum_sidecar(data))));
    }
    detail::require(expected.empty() || expected == actual, Errc::malformed_input,
                    fmt::format("banknote data file {} is corrupt: expected sha256 {}, found {}", path, expected, actual));
    return actual;
}

struct EstimatorFlags {
    std::size_t bins = default_bin_count;
    std::size_t grid_steps = default_grid_steps;
    double pseudo_count = default_pseudo_count;
    std::string naive = "threshold";
    double threshold = 0.5;
    std::string profile_source = "training";

    void add_to(CLI::App& app) {
        app.add_option("--bins", bins, "Histogram bin count")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
        app.add_option("--grid-steps", grid_steps, "Number of proportion grid points")
            ->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
        app.add_option("--pseudo-count", pseudo_count, "Additive smoothing per bin")->check(CLI::NonNegativeNumber);
        app.add_option("--naive", naive, "Naive estimator: threshold or mean")
            ->check(CLI::IsMember({"threshold", "mean"}));
        app.add_option("--threshold", threshold, "Naive estimator threshold")->check(CLI::Range(0.0, 1.0));
        app.add_option("--profile-source", profile_source, "Fit score densities on training or held-out data")
            ->check(CLI::IsMember({"training", "held-out"}));
    }

    EstimatorConfig config() const {
        EstimatorConfig c;
        c.bin_count = bins;
        c.grid_steps = grid_steps;
        c.pseudo_count = pseudo_count;
        c.naive_rule = naive == "mean" ? NaiveRule::mean_score : NaiveRule::threshold;
        c.threshold = threshold;
        c.profile_source = profile_source == "held-out" ? ProfileSource::held_out : ProfileSource::training;
        return c;
    }
};

inline void write_replication(const fs::path& dir, const ReplicationResult& result, nlohmann::json metadata) {
    std::ostringstream records;
    write_records_csv(records, result.records);
    write_text(dir / "records.csv", records.str());
    std::ostringstream summary;
    write_summary_csv(summary, summarize(result.records));
    write_text(dir / "summary.csv", summary.str());
    metadata["run"] = run_summary_json(result);
    metadata["outputs"] = {"records.csv", "summary.csv", "metadata.json"};
    write_text(dir / "metadata.json", metadata.dump(2) + "\n");
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Prevalence estimation from classifier scores by maximum likelihood"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    SeedOption seed;
    unsigned jobs = 1;
    std::string output_dir = ".";
    const auto add_shared = [&](CLI::App& sub) {
        sub.add_option("--seed", seed.value, "Master random seed (drawn from entropy if omitted)");
        sub.add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1U, 1024U));
        sub.add_option("-o,--output-dir", output_dir, "Directory for result files");
    };

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Two-Gaussian replication");
    SimulationConfig sim;
    EstimatorFlags sim_est;
    add_shared(*simulate);
    sim_est.add_to(*simulate);
    simulate->add_option("--repeats", sim.repeats)->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    simulate->add_option("--train-priors", sim.training_priors)->delimiter(',')->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--eval-priors", sim.eval_priors)->delimiter(',')->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--n", sim.n, "Training set size")->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    simulate->add_option("--eval-size", sim.eval_size)->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    simulate->add_option("--negative-mean", sim.negative_mean);
    simulate->add_option("--positive-mean", sim.positive_mean);
    simulate->add_option("--std-dev", sim.std_dev)->check(CLI::PositiveNumber);

    // banknote
    auto* banknote = app.add_subcommand("banknote", "Banknote authentication replication");
    BanknoteConfig bank;
    EstimatorFlags bank_est;
    std::string data_path = "data_banknote_authentication.txt";
    std::string url = banknote_url;
    std::string expected_sha;
    std::vector<std::string> features{"skewness", "curtosis"};
    std::string split_mode = "resplit";
    bool fetch = false;
    bool header = false;
    add_shared(*banknote);
    bank_est.add_to(*banknote);
    banknote->add_option("--data", data_path, "Banknote CSV (variance,skewness,curtosis,entropy,class)");
    banknote->add_flag("--fetch", fetch, "Download the data file if it is missing");
    banknote->add_option("--url", url, "Download location used by --fetch");
    banknote->add_option("--sha256", expected_sha, "Expected SHA-256 of the data file");
    banknote->add_flag("--header", header, "Tolerate a header row");
    banknote->add_option("--features", features)->delimiter(',')
        ->check(CLI::IsMember({"variance", "skewness", "curtosis", "entropy"}));
    banknote->add_option("--repeats", bank.repeats)->check(CLI::Range(std::size_t{1}, std::size_t{1000000}));
    banknote->add_option("--eval-priors", bank.eval_priors)->delimiter(',')->check(CLI::Range(0.0, 1.0));
    banknote->add_option("--eval-size", bank.eval_size)->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    banknote->add_option("--train-positives", bank.split.train_positives);
    banknote->add_option("--train-negatives", bank.split.train_negatives);
    banknote->add_option("--split", split_mode, "resplit (new split per repeat) or fixed")
        ->check(CLI::IsMember({"resplit", "fixed"}));

    // estimate
    auto* estimate = app.add_subcommand("estimate", "Estimate the positive proportion of a score file");
    std::string scores_path;
    std::string profile_path;
    std::string curve_path;
    std::size_t est_grid = default_grid_steps;
    double est_threshold = 0.5;
    add_shared(*estimate);
    estimate->add_option("--scores", scores_path, "One score per line")->required();
    estimate->add_option("--profile", profile_path, "Score profile JSON")->required();
    estimate->add_option("--grid-steps", est_grid)->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
    estimate->add_option("--threshold", est_threshold)->check(CLI::Range(0.0, 1.0));
    estimate->add_option("--curve", curve_path, "Write the likelihood curve CSV here");

    // train
    auto* train = app.add_subcommand("train", "Fit and serialize a logistic model");
    std::string train_data;
    bool train_header = false;
    bool train_banknote = false;
    std::vector<std::string> train_features{"skewness", "curtosis"};
    TrainConfig train_config;
    add_shared(*train);
    train->add_option("--data", train_data, "Rows x1,...,xd,label (or a banknote file with --banknote)")->required();
    train->add_flag("--header", train_header, "Skip a header row");
    train->add_flag("--banknote", train_banknote, "Read --data as a banknote file");
    train->add_option("--features", train_features)->delimiter(',')
        ->check(CLI::IsMember({"variance", "skewness", "curtosis", "entropy"}));
    train->add_option("--max-iterations", train_config.max_iterations)->check(CLI::Range(1, 100000000));
    train->add_option("--tolerance", train_config.tolerance)->check(CLI::PositiveNumber);
    train->add_option("--l2", train_config.l2_penalty)->check(CLI::NonNegativeNumber);

    // profile
    auto* profile = app.add_subcommand("profile", "Fit and serialize a score profile");
    std::string profile_scores;
    std::string profile_model;
    std::string profile_data;
    bool profile_header = false;
    std::size_t profile_bins = default_bin_count;
    double profile_pseudo = default_pseudo_count;
    add_shared(*profile);
    profile->add_option("--scores", profile_scores, "Rows score,label");
    profile->add_option("--model", profile_model, "Model JSON used to score --data");
    profile->add_option("--data", profile_data, "Rows x1,...,xd,label scored by --model");
    profile->add_flag("--header", profile_header, "Skip a header row");
    profile->add_option("--bins", profile_bins)->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    profile->add_option("--pseudo-count", profile_pseudo)->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
        if (profile->parsed() && profile_scores.empty() == (profile_model.empty() || profile_data.empty())) {
            throw CLI::ValidationError("profile", "give either --scores, or --model with --data");
        }
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* failed = &app;
        for (auto* sub : app.get_subcommands()) {
            failed = sub;
        }
        err << failed->help();
        return exit_usage;
    }
    seed.from_user = app.get_subcommands().front()->count("--seed") > 0;

    try {
        if (simulate->parsed()) {
            seed.resolve();
            sim.estimator = sim_est.config();
            sim.master_seed = seed.value;
            sim.jobs = jobs;
            const auto dir = prepare_output_dir(output_dir);
            const auto result = run_simulation_replication(sim);
            auto meta = base_metadata("simulate");
            meta.update(seed.json());
            meta["experiment_id"] = simulation_experiment;
            meta["config"] = to_json(sim);
            write_replication(dir, result, meta);
            out << fmt::format("wrote {} records to {}\n", result.records.size(), dir.string());
        } else if (banknote->parsed()) {
            seed.resolve();
            bank.estimator = bank_est.config();
            bank.master_seed = seed.value;
            bank.jobs = jobs;
            bank.resplit_each_repeat = split_mode == "resplit";
            bank.split.train_total = bank.split.train_positives + bank.split.train_negatives;
            bank.features.clear();
            for (const auto& f : features) {
                bank.features.push_back(parse_feature(f));
            }
            const std::string checksum = ensure_dataset(data_path, fetch, url, expected_sha);
            LoadOptions load;
            load.allow_header = header;
            const auto data = load_banknote_file(data_path, load);
            const auto dir = prepare_output_dir(output_dir);
            const auto result = run_banknote_replication(data, bank);
            const auto counts = count_classes(data);
            auto meta = base_metadata("banknote");
            meta.update(seed.json());
            meta["experiment_id"] = banknote_experiment;
            meta["config"] = to_json(bank);
            meta["dataset"] = {{"path", data_path},
                               {"sha256", checksum},
                               {"records", data.size()},
                               {"positives", counts.positive},
                               {"negatives", counts.negative},
                               {"label_convention", "class column 1 = positive"}};
            write_replication(dir, result, meta);
            if (result.any_separation_warning()) {
                err << "warning: logistic training separated the classes perfectly or did not converge\n";
            }
            out << fmt::format("wrote {} records to {}\n", result.records.size(), dir.string());
        } else if (estimate->parsed()) {
            const auto scores = read_scores(scores_path);
            ScoreProfile prof = [&] {
                try {
                    return profile_from_json(nlohmann::json::parse(read_text(profile_path)));
                } catch (const nlohmann::json::exception& e) {
                    throw Error(Errc::malformed_input, fmt::format("{}: invalid profile JSON: {}", profile_path, e.what()));
                }
            }();
            const auto mle = mle_grid(prof, scores, est_grid);
            out << fmt::format("pi_hat {:.17g}\n", mle.estimate.pi_hat);
            out << fmt::format("naive {:.17g}\n", naive_estimate(scores, est_threshold));
            if (mle.estimate.tie_broken) {
                err << "warning: likelihood maximum is tied; reporting the smallest maximizing proportion\n";
            }
            const bool wants_dir = estimate->count("--output-dir") > 0;
            if (wants_dir && curve_path.empty()) {
                curve_path = (prepare_output_dir(output_dir) / "curve.csv").string();
            }
            if (!curve_path.empty()) {
                std::ostringstream csv;
                write_curve_csv(csv, mle.curve);
                write_text(curve_path, csv.str());
            }
            if (wants_dir) {
                auto meta = base_metadata("estimate");
                meta["scores"] = scores_path;
                meta["profile"] = profile_path;
                meta["grid_steps"] = est_grid;
                meta["pi_hat"] = mle.estimate.pi_hat;
                meta["tie_broken"] = mle.estimate.tie_broken;
                meta["naive"] = naive_estimate(scores, est_threshold);
                meta["threshold"] = est_threshold;
                meta["curve"] = curve_path;
                write_text(prepare_output_dir(output_dir) / "metadata.json", meta.dump(2) + "\n");
            }
        } else if (train->parsed()) {
            std::vector<LabeledSample> samples;
            if (train_banknote) {
                LoadOptions load;
                load.allow_header = train_header;
                samples = select_features(load_banknote_file(train_data, load), train_features);
            } else {
                samples = read_labeled_csv(train_data, train_header);
            }
            const auto fit = train_logistic(samples, train_config);
            const auto dir = prepare_output_dir(output_dir);
            write_text(dir / "model.json", nlohmann::json(fit.model).dump(2) + "\n");
            auto meta = base_metadata("train");
            meta["data"] = train_data;
            meta["samples"] = samples.size();
            meta["train_config"] = {{"max_iterations", train_config.max_iterations},
                                    {"tolerance", train_config.tolerance},
                                    {"l2_penalty", train_config.l2_penalty}};
            if (train_banknote) {
                meta["features"] = train_features;
            }
            meta["report"] = fit.report;
            meta["outputs"] = {"model.json", "metadata.json"};
            write_text(dir / "metadata.json", meta.dump(2) + "\n");
            if (fit.report.separation_warning) {
                err << "warning: logistic training separated the classes perfectly or did not converge\n";
            }
            out << fmt::format("converged {} after {} iterations\n", fit.report.converged, fit.report.iterations);
        } else if (profile->parsed()) {
            std::vector<LabeledScore> labeled;
            if (!profile_scores.empty()) {
                labeled = read_labeled_scores(profile_scores, profile_header);
            } else {
                const auto model = nlohmann::json::parse(read_text(profile_model)).get<LogisticModel>();
                const auto samples = read_labeled_csv(profile_data, profile_header);
                labeled = label_scores(predict_scores(model, samples), samples);
            }
            const auto fitted = fit_profile(labeled, profile_bins, profile_pseudo);
            const auto dir = prepare_output_dir(output_dir);
            write_text(dir / "profile.json", nlohmann::json(fitted).dump(2) + "\n");
            auto meta = base_metadata("profile");
            meta["bins"] = profile_bins;
            meta["pseudo_count"] = profile_pseudo;
            meta["scores"] = profile_scores.empty() ? nlohmann::json(nullptr) : nlohmann::json(profile_scores);
            meta["model"] = profile_model.empty() ? nlohmann::json(nullptr) : nlohmann::json(profile_model);
            meta["data"] = profile_data.empty() ? nlohmann::json(nullptr) : nlohmann::json(profile_data);
            meta["outputs"] = {"profile.json", "metadata.json"};
            write_text(dir / "metadata.json", meta.dump(2) + "\n");
            out << fmt::format("fitted {}-bin profile from {} scores\n", profile_bins, labeled.size());
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    } catch (const nlohmann::json::exception& e) {
        err << "error: invalid JSON: " << e.what() << "\n";
        return exit_failure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_ok;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"prevmle"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace prevmle::cli
