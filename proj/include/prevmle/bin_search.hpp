#pragma once

// Choosing the histogram bin count by measured prevalence-estimation error.
//
// Protocol:
//  1. Shuffle each class's labeled scores (seeded) and cut it in two: the
//     first half fits the candidate profile, the rest is the validation pool.
//  2. For each target proportion and repeat, draw a validation bag of
//     `bag_size` scores with exactly round(bag_size * pi) positives, sampling
//     each class with replacement from its validation pool.
//  3. Every candidate is scored on the same bags; its error is the mean of
//     |pi_hat - pi| over all bags.
// The candidate with the smallest error wins; ties go to the earliest listed.

#include <prevmle/density.hpp>
#include <prevmle/error.hpp>
#include <prevmle/prevalence.hpp>
#include <prevmle/random.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace prevmle {

struct BinSearchProtocol {
    std::vector<double> eval_priors{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t bag_size = 200;
    std::size_t repeats = 20;
    double pseudo_count = default_pseudo_count;
    std::size_t grid_steps = default_grid_steps;
    std::uint64_t seed = 0;
};

struct BinSearchResult {
    std::size_t chosen = 0;
    std::vector<std::size_t> candidates;
    std::vector<double> mean_abs_error; ///< parallel to candidates
};

inline BinSearchResult search_bins(std::span<const LabeledScore> scores, std::span<const std::size_t> candidates,
                                   const BinSearchProtocol& protocol = {}) {
    detail::require(!candidates.empty(), Errc::empty_input, "no candidate bin counts");
    for (std::size_t n : candidates) {
        detail::require(n >= 1, Errc::invalid_argument, "candidate bin counts must be at least 1");
    }
    detail::require(!protocol.eval_priors.empty() && protocol.repeats >= 1 && protocol.bag_size >= 1,
                    Errc::invalid_argument, "bin search protocol needs priors, repeats and a bag size");

    std::vector<double> pos;
    std::vector<double> neg;
    for (const auto& s : scores) {
        detail::check_score(s.score);
        (s.label == Label::positive ? pos : neg).push_back(s.score);
    }
    detail::require(!pos.empty() && !neg.empty(), Errc::single_class, "bin search needs scores of both classes");
    detail::require(pos.size() >= 2 && neg.size() >= 2, Errc::insufficient_records,
                    "bin search needs at least two scores per class");

    Rng split_rng(derive_seed(protocol.seed, 0));
    split_rng.shuffle(std::span<double>(pos));
    split_rng.shuffle(std::span<double>(neg));
    const auto half = [](const std::vector<double>& v) { return v.size() / 2; };
    const std::span<const double> pos_fit(pos.data(), half(pos));
    const std::span<const double> pos_val(pos.data() + half(pos), pos.size() - half(pos));
    const std::span<const double> neg_fit(neg.data(), half(neg));
    const std::span<const double> neg_val(neg.data() + half(neg), neg.size() - half(neg));

    std::vector<ScoreProfile> profiles;
    profiles.reserve(candidates.size());
    for (std::size_t n : candidates) {
        profiles.emplace_back(fit_histogram(pos_fit, n, protocol.pseudo_count),
                              fit_histogram(neg_fit, n, protocol.pseudo_count));
    }

    BinSearchResult result;
    result.candidates.assign(candidates.begin(), candidates.end());
    result.mean_abs_error.assign(candidates.size(), 0.0);
    std::size_t bags = 0;
    std::vector<double> bag(protocol.bag_size);
    for (std::size_t p = 0; p < protocol.eval_priors.size(); ++p) {
        const double pi = protocol.eval_priors[p];
        detail::check_pi(pi);
        const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(protocol.bag_size) * pi));
        for (std::size_t r = 0; r < protocol.repeats; ++r) {
            Rng rng(derive_seed(derive_seed(protocol.seed, 1 + p), r));
            for (std::size_t i = 0; i < protocol.bag_size; ++i) {
                bag[i] = i < n_pos ? pos_val[rng.below(pos_val.size())] : neg_val[rng.below(neg_val.size())];
            }
            const double truth = static_cast<double>(n_pos) / static_cast<double>(protocol.bag_size);
            for (std::size_t c = 0; c < profiles.size(); ++c) {
                const double pi_hat = mle_grid(profiles[c], bag, protocol.grid_steps).estimate.pi_hat;
                result.mean_abs_error[c] += std::abs(pi_hat - truth);
            }
            ++bags;
        }
    }
    std::size_t best = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        result.mean_abs_error[c] /= static_cast<double>(bags);
        if (result.mean_abs_error[c] < result.mean_abs_error[best]) {
            best = c;
        }
    }
    result.chosen = candidates[best];
    return result;
}

inline std::size_t grid_search_bins(std::span<const LabeledScore> scores, std::span<const std::size_t> candidates,
                                    const BinSearchProtocol& protocol = {}) {
    return search_bins(scores, candidates, protocol).chosen;
}

} // namespace prevmle
