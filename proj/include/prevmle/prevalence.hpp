#pragma once

// Maximum-likelihood estimate of the positive proportion pi in an unlabeled
// bag of scores, given the learned class-conditional score densities.
//
// Each score b has mixture probability
//     P(b | pi) = pi * P(b | +) + (1 - pi) * P(b | -)
// and the bag's log-likelihood is the sum of ln P(b | pi). The estimate is the
// argmax of that sum over a uniform grid on [0, 1].
//
// Since the densities are histograms, P(b | pi) depends on b only through its
// bin, so the log-likelihood is evaluated from per-bin counts:
//     sum_k c_k * ln(pi * pos_k + (1 - pi) * neg_k)
// summed in ascending bin order. Two bags with equal bin counts therefore get
// bit-identical curves.

#include <prevmle/density.hpp>
#include <prevmle/error.hpp>

#include <fmt/format.h>

#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace prevmle {

inline constexpr std::size_t default_grid_steps = 1001;

struct LikelihoodCurve {
    std::vector<double> grid;
    std::vector<double> log_likelihood;
};

struct PrevalenceEstimate {
    double pi_hat = 0.0;
    double grid_step = 0.0;
    bool tie_broken = false;
};

struct MleResult {
    PrevalenceEstimate estimate;
    LikelihoodCurve curve;
};

namespace detail {

inline void check_pi(double pi) {
    require(pi >= 0.0 && pi <= 1.0, Errc::out_of_range, "proportion " + std::to_string(pi) + " is outside [0, 1]");
}

inline double mixture(double pos, double neg, double pi) noexcept {
    if (pos == neg) {
        return pos;
    }
    return pi * pos + (1.0 - pi) * neg;
}

} // namespace detail

inline double score_mass(const ScoreProfile& profile, double b, double pi) {
    detail::check_pi(pi);
    return detail::mixture(mass_of(profile.positive(), b), mass_of(profile.negative(), b), pi);
}

/// Log-likelihood of pi given per-bin counts of the evaluation scores.
inline double log_likelihood_from_counts(const ScoreProfile& profile, std::span<const std::size_t> counts, double pi) {
    detail::check_pi(pi);
    detail::require(counts.size() == profile.bin_count(), Errc::dimension_mismatch,
                    "bin count vector does not match profile");
    const auto pos = profile.positive().masses();
    const auto neg = profile.negative().masses();
    double total = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) {
            continue;
        }
        const double m = detail::mixture(pos[k], neg[k], pi);
        detail::require(m > 0.0, Errc::zero_mass,
                        fmt::format("score mass is zero in bin {} at pi = {}; fit densities with a positive pseudo-count", k, pi));
        total += static_cast<double>(counts[k]) * std::log(m);
    }
    return total;
}

inline double log_likelihood(const ScoreProfile& profile, std::span<const double> scores, double pi) {
    detail::require(!scores.empty(), Errc::empty_input, "cannot evaluate a likelihood on no scores");
    const auto counts = bin_counts(scores, profile.bin_count());
    return log_likelihood_from_counts(profile, counts, pi);
}

/// Uniform grid {0, 1/(G-1), ..., 1}; endpoints are exact.
inline std::vector<double> proportion_grid(std::size_t grid_steps) {
    detail::require(grid_steps >= 2, Errc::invalid_argument, "grid_steps must be at least 2");
    std::vector<double> grid(grid_steps);
    const double last = static_cast<double>(grid_steps - 1);
    for (std::size_t i = 0; i < grid_steps; ++i) {
        grid[i] = static_cast<double>(i) / last;
    }
    return grid;
}

/// Argmax over the count-based curve. Ties go to the smallest pi and are flagged.
inline MleResult mle_grid_from_counts(const ScoreProfile& profile, std::span<const std::size_t> counts,
                                      std::size_t grid_steps = default_grid_steps) {
    MleResult result;
    result.curve.grid = proportion_grid(grid_steps);
    result.curve.log_likelihood.resize(grid_steps);
    std::size_t best = 0;
    bool tied = false;
    for (std::size_t i = 0; i < grid_steps; ++i) {
        const double ll = log_likelihood_from_counts(profile, counts, result.curve.grid[i]);
        result.curve.log_likelihood[i] = ll;
        if (i == 0) {
            continue;
        }
        const double top = result.curve.log_likelihood[best];
        if (ll > top) {
            best = i;
            tied = false;
        } else if (ll == top) {
            tied = true;
        }
    }
    result.estimate.pi_hat = result.curve.grid[best];
    result.estimate.grid_step = 1.0 / static_cast<double>(grid_steps - 1);
    result.estimate.tie_broken = tied;
    return result;
}

inline MleResult mle_grid(const ScoreProfile& profile, std::span<const double> scores,
                          std::size_t grid_steps = default_grid_steps) {
    detail::require(!scores.empty(), Errc::empty_input, "cannot estimate a proportion from no scores");
    const auto counts = bin_counts(scores, profile.bin_count());
    return mle_grid_from_counts(profile, counts, grid_steps);
}

/// Fraction of scores strictly above `threshold`: the classifier's own count of positives.
inline double naive_estimate(std::span<const double> scores, double threshold = 0.5) {
    detail::require(!scores.empty(), Errc::empty_input, "cannot estimate a proportion from no scores");
    std::size_t above = 0;
    for (double b : scores) {
        if (b > threshold) {
            ++above;
        }
    }
    return static_cast<double>(above) / static_cast<double>(scores.size());
}

/// Mean predicted probability, the soft-count variant of naive_estimate.
inline double mean_score_estimate(std::span<const double> scores) {
    detail::require(!scores.empty(), Errc::empty_input, "cannot estimate a proportion from no scores");
    double total = 0.0;
    for (double b : scores) {
        total += b;
    }
    return total / static_cast<double>(scores.size());
}

/// Two columns: pi,log_likelihood, 17 significant digits.
inline void write_curve_csv(std::ostream& out, const LikelihoodCurve& curve) {
    out << "pi,log_likelihood\n";
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        out << fmt::format("{:.17g},{:.17g}\n", curve.grid[i], curve.log_likelihood[i]);
    }
}

} // namespace prevmle
