#pragma once

// Banknote authentication data: ingestion, feature selection, the seeded
// train/holdout split and proportion-controlled evaluation sets.
//
// Input rows are `variance,skewness,curtosis,entropy,class` with no header.
// Class 1 is treated as positive unless LoadOptions says otherwise.

#include <prevmle/error.hpp>
#include <prevmle/random.hpp>
#include <prevmle/scorer.hpp>

#include <fmt/format.h>
#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace prevmle {

struct BanknoteRecord {
    double variance = 0.0;
    double skewness = 0.0;
    double curtosis = 0.0;
    double entropy = 0.0;
    Label label = Label::negative;

    bool operator==(const BanknoteRecord&) const = default;
};

struct LoadOptions {
    bool allow_header = false;
    int positive_class = 1; ///< class-column value read as positive; the other of {0, 1} is negative
};

struct ClassCounts {
    std::size_t positive = 0;
    std::size_t negative = 0;

    std::size_t total() const noexcept { return positive + negative; }
    bool operator==(const ClassCounts&) const = default;
};

template <typename Range>
ClassCounts count_classes(const Range& items) {
    ClassCounts c;
    for (const auto& item : items) {
        ++(item.label == Label::positive ? c.positive : c.negative);
    }
    return c;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size() && !text.empty();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            return fields;
        }
        start = comma + 1;
    }
}

} // namespace detail

inline std::vector<BanknoteRecord> load_banknote(std::istream& in, const LoadOptions& options = {}) {
    detail::require(options.positive_class == 0 || options.positive_class == 1, Errc::invalid_argument,
                    "positive_class must be 0 or 1");
    std::vector<BanknoteRecord> records;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const auto text = detail::trim(line);
        if (text.empty()) {
            continue;
        }
        const auto fields = detail::split_commas(text);
        detail::require(fields.size() == 5, Errc::malformed_input,
                        fmt::format("row {}: expected 5 comma-separated columns, found {}", row, fields.size()));
        std::array<double, 5> values{};
        bool ok = true;
        for (std::size_t i = 0; i < 5; ++i) {
            ok = ok && detail::parse_double(fields[i], values[i]) && std::isfinite(values[i]);
        }
        if (!ok && options.allow_header && records.empty() && row == 1) {
            continue;
        }
        detail::require(ok, Errc::malformed_input, fmt::format("row {}: unparseable number", row));
        detail::require(values[4] == 0.0 || values[4] == 1.0, Errc::malformed_input,
                        fmt::format("row {}: class must be 0 or 1", row));
        const bool positive = static_cast<int>(values[4]) == options.positive_class;
        records.push_back({values[0], values[1], values[2], values[3], positive ? Label::positive : Label::negative});
    }
    detail::require(!records.empty(), Errc::empty_input, "banknote input contains no records");
    return records;
}

inline std::vector<BanknoteRecord> load_banknote_file(const std::string& path, const LoadOptions& options = {}) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), Errc::io_error, "cannot open banknote data file: " + path);
    return load_banknote(in, options);
}

/// Writes records in input form with shortest round-trip numbers.
inline void write_banknote(std::ostream& out, std::span<const BanknoteRecord> records, const LoadOptions& options = {}) {
    for (const auto& r : records) {
        const int cls = r.label == Label::positive ? options.positive_class : 1 - options.positive_class;
        out << fmt::format("{},{},{},{},{}\n", r.variance, r.skewness, r.curtosis, r.entropy, cls);
    }
}

enum class BanknoteFeature { variance, skewness, curtosis, entropy };

inline BanknoteFeature parse_feature(std::string_view name) {
    if (name == "variance") return BanknoteFeature::variance;
    if (name == "skewness") return BanknoteFeature::skewness;
    if (name == "curtosis") return BanknoteFeature::curtosis;
    if (name == "entropy") return BanknoteFeature::entropy;
    throw Error(Errc::unknown_feature, fmt::format("unknown banknote feature '{}'", name));
}

inline const char* to_string(BanknoteFeature f) noexcept {
    switch (f) {
    case BanknoteFeature::variance: return "variance";
    case BanknoteFeature::skewness: return "skewness";
    case BanknoteFeature::curtosis: return "curtosis";
    case BanknoteFeature::entropy: return "entropy";
    }
    return "?";
}

inline double feature_value(const BanknoteRecord& r, BanknoteFeature f) noexcept {
    switch (f) {
    case BanknoteFeature::variance: return r.variance;
    case BanknoteFeature::skewness: return r.skewness;
    case BanknoteFeature::curtosis: return r.curtosis;
    case BanknoteFeature::entropy: return r.entropy;
    }
    return 0.0;
}

/// Features in the order listed.
inline std::vector<LabeledSample> select_features(std::span<const BanknoteRecord> records,
                                                  std::span<const BanknoteFeature> features) {
    detail::require(!features.empty(), Errc::invalid_argument, "select at least one feature");
    std::vector<LabeledSample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        LabeledSample s;
        s.label = r.label;
        s.features.reserve(features.size());
        for (auto f : features) {
            s.features.push_back(feature_value(r, f));
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<LabeledSample> select_features(std::span<const BanknoteRecord> records,
                                                  std::span<const std::string> names) {
    std::vector<BanknoteFeature> features;
    for (const auto& n : names) {
        features.push_back(parse_feature(n));
    }
    return select_features(records, features);
}

struct SplitConfig {
    std::size_t train_total = 411;
    std::size_t train_positives = 195;
    std::size_t train_negatives = 216;
    std::uint64_t seed = 0;
};

struct TrainSplit {
    std::vector<BanknoteRecord> train;
    std::vector<BanknoteRecord> holdout;
    std::vector<std::size_t> train_indices;   ///< ascending indices into the input
    std::vector<std::size_t> holdout_indices; ///< ascending
};

/// Exact per-class counts drawn uniformly without replacement; the rest is holdout.
inline TrainSplit make_train_split(std::span<const BanknoteRecord> records, const SplitConfig& config) {
    detail::require(config.train_positives + config.train_negatives == config.train_total, Errc::invalid_argument,
                    "train_positives + train_negatives must equal train_total");
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < records.size(); ++i) {
        (records[i].label == Label::positive ? pos : neg).push_back(i);
    }
    detail::require(pos.size() >= config.train_positives, Errc::insufficient_records,
                    fmt::format("need {} positive records, have {}", config.train_positives, pos.size()));
    detail::require(neg.size() >= config.train_negatives, Errc::insufficient_records,
                    fmt::format("need {} negative records, have {}", config.train_negatives, neg.size()));

    Rng rng(config.seed);
    rng.shuffle(std::span<std::size_t>(pos));
    rng.shuffle(std::span<std::size_t>(neg));
    std::vector<bool> in_train(records.size(), false);
    for (std::size_t i = 0; i < config.train_positives; ++i) in_train[pos[i]] = true;
    for (std::size_t i = 0; i < config.train_negatives; ++i) in_train[neg[i]] = true;

    TrainSplit split;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (in_train[i]) {
            split.train_indices.push_back(i);
            split.train.push_back(records[i]);
        } else {
            split.holdout_indices.push_back(i);
            split.holdout.push_back(records[i]);
        }
    }
    return split;
}

/// JSON manifest that pins a split for exact replay.
inline nlohmann::json split_manifest(const TrainSplit& split, const SplitConfig& config) {
    const auto train = count_classes(split.train);
    const auto holdout = count_classes(split.holdout);
    return {{"seed", config.seed},
            {"train_indices", split.train_indices},
            {"holdout_indices", split.holdout_indices},
            {"train_counts", {{"positive", train.positive}, {"negative", train.negative}}},
            {"holdout_counts", {{"positive", holdout.positive}, {"negative", holdout.negative}}}};
}

/// round(size * pi) positives and the rest negatives, each drawn with replacement
/// from the holdout's samples of that class. Positives come first.
inline std::vector<LabeledSample> make_eval_set(std::span<const LabeledSample> holdout, double pi, std::size_t size,
                                                std::uint64_t seed) {
    detail::require(pi >= 0.0 && pi <= 1.0, Errc::out_of_range, "evaluation proportion must lie in [0, 1]");
    detail::require(size >= 1, Errc::invalid_argument, "evaluation set size must be at least 1");
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < holdout.size(); ++i) {
        (holdout[i].label == Label::positive ? pos : neg).push_back(i);
    }
    detail::require(!pos.empty() && !neg.empty(), Errc::single_class,
                    "holdout must contain records of both classes");
    const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(size) * pi));
    Rng rng(seed);
    std::vector<LabeledSample> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        const auto& pool = i < n_pos ? pos : neg;
        out.push_back(holdout[pool[rng.below(pool.size())]]);
    }
    return out;
}

} // namespace prevmle
