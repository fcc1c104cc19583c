#pragma once

// Class-conditional score densities as normalized equal-width histograms on [0, 1].

#include <prevmle/error.hpp>
#include <prevmle/scorer.hpp>

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace prevmle {

/// Default additive smoothing per bin when densities feed the likelihood.
inline constexpr double default_pseudo_count = 0.5;
inline constexpr std::size_t default_bin_count = 3;

namespace detail {

inline void check_score(double b) {
    require(b >= 0.0 && b <= 1.0, Errc::out_of_range, "score " + std::to_string(b) + " is outside [0, 1]");
}

} // namespace detail

/// floor(b * n), with b == 1 folded into the last bin.
inline std::size_t bin_index(double b, std::size_t n) {
    detail::require(n >= 1, Errc::invalid_argument, "bin count must be at least 1");
    detail::check_score(b);
    const auto i = static_cast<std::size_t>(std::floor(b * static_cast<double>(n)));
    return i < n ? i : n - 1;
}

class BinnedDensity {
public:
    BinnedDensity() = default;

    /// Wraps explicit masses. They must be non-negative and sum to 1 within 1e-9.
    static BinnedDensity from_masses(std::vector<double> masses, double pseudo_count = 0.0) {
        detail::require(!masses.empty(), Errc::invalid_argument, "density needs at least one bin");
        detail::require(pseudo_count >= 0.0 && std::isfinite(pseudo_count), Errc::invalid_argument,
                        "pseudo_count must be finite and non-negative");
        double total = 0.0;
        for (double m : masses) {
            detail::require(std::isfinite(m) && m >= 0.0, Errc::invalid_argument, "density mass must be finite and >= 0");
            total += m;
        }
        detail::require(std::abs(total - 1.0) <= 1e-9, Errc::invalid_argument,
                        "density masses sum to " + std::to_string(total) + ", expected 1");
        BinnedDensity d;
        d.masses_ = std::move(masses);
        d.pseudo_count_ = pseudo_count;
        return d;
    }

    std::size_t bin_count() const noexcept { return masses_.size(); }
    std::span<const double> masses() const noexcept { return masses_; }
    double pseudo_count() const noexcept { return pseudo_count_; }

    bool operator==(const BinnedDensity&) const = default;

private:
    std::vector<double> masses_;
    double pseudo_count_ = 0.0;
};

/// Per-bin counts of `scores` over n equal-width bins.
inline std::vector<std::size_t> bin_counts(std::span<const double> scores, std::size_t n) {
    std::vector<std::size_t> counts(n, 0);
    for (double b : scores) {
        ++counts[bin_index(b, n)];
    }
    return counts;
}

/// masses[i] = (count_i + pseudo_count) / (total + n * pseudo_count).
inline BinnedDensity fit_histogram(std::span<const double> scores, std::size_t n, double pseudo_count) {
    detail::require(n >= 1, Errc::invalid_argument, "bin count must be at least 1");
    detail::require(pseudo_count >= 0.0 && std::isfinite(pseudo_count), Errc::invalid_argument,
                    "pseudo_count must be finite and non-negative");
    detail::require(!scores.empty() || pseudo_count > 0.0, Errc::empty_input,
                    "cannot fit a histogram to no scores without smoothing");
    const auto counts = bin_counts(scores, n);
    const double denom = static_cast<double>(scores.size()) + static_cast<double>(n) * pseudo_count;
    std::vector<double> masses(n);
    for (std::size_t i = 0; i < n; ++i) {
        masses[i] = (static_cast<double>(counts[i]) + pseudo_count) / denom;
    }
    return BinnedDensity::from_masses(std::move(masses), pseudo_count);
}

inline double mass_of(const BinnedDensity& density, double b) {
    return density.masses()[bin_index(b, density.bin_count())];
}

/// Learned score distributions of the two classes.
class ScoreProfile {
public:
    ScoreProfile(BinnedDensity positive, BinnedDensity negative)
        : positive_(std::move(positive)), negative_(std::move(negative)) {
        detail::require(positive_.bin_count() >= 1 && positive_.bin_count() == negative_.bin_count(),
                        Errc::invalid_argument, "positive and negative densities must have the same bin count");
    }

    const BinnedDensity& positive() const noexcept { return positive_; }
    const BinnedDensity& negative() const noexcept { return negative_; }
    std::size_t bin_count() const noexcept { return positive_.bin_count(); }

    bool operator==(const ScoreProfile&) const = default;

private:
    BinnedDensity positive_;
    BinnedDensity negative_;
};

struct LabeledScore {
    double score = 0.0;
    Label label = Label::negative;
};

/// Fits one histogram per class. Both classes must be present.
inline ScoreProfile fit_profile(std::span<const LabeledScore> scores, std::size_t n,
                                double pseudo_count = default_pseudo_count) {
    std::vector<double> pos;
    std::vector<double> neg;
    for (const auto& s : scores) {
        (s.label == Label::positive ? pos : neg).push_back(s.score);
    }
    detail::require(!pos.empty() && !neg.empty(), Errc::single_class, "score profile needs scores of both classes");
    return ScoreProfile(fit_histogram(pos, n, pseudo_count), fit_histogram(neg, n, pseudo_count));
}

inline std::vector<LabeledScore> label_scores(std::span<const double> scores, std::span<const LabeledSample> samples) {
    detail::require(scores.size() == samples.size(), Errc::dimension_mismatch, "score and sample counts differ");
    std::vector<LabeledScore> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = {scores[i], samples[i].label};
    }
    return out;
}

inline void to_json(nlohmann::json& j, const ScoreProfile& profile) {
    const auto pos = profile.positive().masses();
    const auto neg = profile.negative().masses();
    j = nlohmann::json{{"bin_count", profile.bin_count()},
                       {"positive_masses", std::vector<double>(pos.begin(), pos.end())},
                       {"negative_masses", std::vector<double>(neg.begin(), neg.end())},
                       {"pseudo_count", profile.positive().pseudo_count()}};
}

inline ScoreProfile profile_from_json(const nlohmann::json& j) {
    const auto n = j.at("bin_count").get<std::size_t>();
    auto pos = j.at("positive_masses").get<std::vector<double>>();
    auto neg = j.at("negative_masses").get<std::vector<double>>();
    const double pseudo = j.value("pseudo_count", 0.0);
    detail::require(pos.size() == n && neg.size() == n, Errc::malformed_input,
                    "profile mass arrays do not match bin_count");
    return ScoreProfile(BinnedDensity::from_masses(std::move(pos), pseudo),
                        BinnedDensity::from_masses(std::move(neg), pseudo));
}

} // namespace prevmle
