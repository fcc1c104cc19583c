#pragma once

// Two-Gaussian simulation data: one real feature, negatives ~ N(negative_mean, sd^2)
// and positives ~ N(positive_mean, sd^2). Class counts are exact, not Bernoulli.

#include <prevmle/error.hpp>
#include <prevmle/random.hpp>
#include <prevmle/scorer.hpp>

#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

namespace prevmle {

struct GaussianPairConfig {
    double negative_mean = 0.0;
    double positive_mean = 2.0;
    double std_dev = 1.0;
    std::uint64_t seed = 0;
};

inline std::size_t positive_count(std::size_t n, double p) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * p));
}

/// n samples, round(n * p) of them positive. Negatives come first in the output.
inline std::vector<LabeledSample> generate(const GaussianPairConfig& config, std::size_t n, double p) {
    detail::require(n >= 1, Errc::invalid_argument, "sample count must be at least 1");
    detail::require(p >= 0.0 && p <= 1.0, Errc::out_of_range, "positive proportion must lie in [0, 1]");
    detail::require(std::isfinite(config.std_dev) && config.std_dev > 0.0, Errc::invalid_argument,
                    "std_dev must be positive");
    detail::require(std::isfinite(config.negative_mean) && std::isfinite(config.positive_mean), Errc::non_finite,
                    "class means must be finite");

    const std::size_t n_pos = positive_count(n, p);
    Rng rng(config.seed);
    std::vector<LabeledSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool positive = i >= n - n_pos;
        const double mean = positive ? config.positive_mean : config.negative_mean;
        out.push_back({{rng.normal(mean, config.std_dev)}, positive ? Label::positive : Label::negative});
    }
    return out;
}

/// CSV with columns x,label (label 1 = positive).
inline void write_samples_csv(std::ostream& out, std::span<const LabeledSample> samples) {
    out << "x,label\n";
    for (const auto& s : samples) {
        detail::require(s.features.size() == 1, Errc::dimension_mismatch, "sample dump expects one feature");
        out << fmt::format("{:.17g},{}\n", s.features[0], s.label == Label::positive ? 1 : 0);
    }
}

} // namespace prevmle
