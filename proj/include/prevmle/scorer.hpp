#pragma once

// Binary logistic regression scorer. Maps a feature vector to a score in
// (0, 1) read as P(+ | x, training set).
//
// Parameters are kept in standardized coordinates: the model stores the
// per-feature training mean and scale, and the linear predictor is
//   z = intercept + sum_j weights[j] * (x[j] - feature_means[j]) / feature_scales[j].
//
// Training minimizes the mean negative log-likelihood plus (l2/2) * |weights|^2
// (intercept unpenalized) with damped Newton steps and Armijo backtracking.
// Everything is full-batch and order-fixed, so training is deterministic.

#include <prevmle/error.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace prevmle {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

inline Label flip(Label label) noexcept {
    return label == Label::positive ? Label::negative : Label::positive;
}

struct LabeledSample {
    std::vector<double> features;
    Label label = Label::negative;
};

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    std::vector<double> feature_means;
    std::vector<double> feature_scales;

    std::size_t dimension() const noexcept { return weights.size(); }

    /// Throws if the field dimensions disagree or a scale is not strictly positive.
    void validate() const {
        detail::require(!weights.empty(), Errc::invalid_argument, "logistic model has no weights");
        detail::require(feature_means.size() == weights.size() && feature_scales.size() == weights.size(),
                        Errc::dimension_mismatch, "logistic model field dimensions disagree");
        for (double s : feature_scales) {
            detail::require(std::isfinite(s) && s > 0.0, Errc::invalid_argument,
                            "logistic model feature scale must be finite and positive");
        }
        const auto finite = [](double v) { return std::isfinite(v); };
        detail::require(std::isfinite(intercept) && std::ranges::all_of(weights, finite) &&
                            std::ranges::all_of(feature_means, finite),
                        Errc::non_finite, "logistic model has non-finite parameters");
    }

    /// Slope and intercept on the raw (unstandardized) feature scale.
    struct RawCoefficients {
        std::vector<double> slopes;
        double intercept;
    };

    RawCoefficients raw_coefficients() const {
        RawCoefficients raw{std::vector<double>(weights.size()), intercept};
        for (std::size_t j = 0; j < weights.size(); ++j) {
            raw.slopes[j] = weights[j] / feature_scales[j];
            raw.intercept -= raw.slopes[j] * feature_means[j];
        }
        return raw;
    }

    bool operator==(const LogisticModel&) const = default;
};

struct TrainConfig {
    int max_iterations = 10'000;
    double tolerance = 1e-8;  ///< on the gradient infinity-norm
    double l2_penalty = 1e-6; ///< weights only
};

struct TrainReport {
    int iterations = 0;
    double final_gradient_norm = 0.0;
    bool converged = false;
    bool separation_warning = false;
};

struct TrainResult {
    LogisticModel model;
    TrainReport report;
};

namespace detail {

inline double sigmoid(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + e^z) without overflow.
inline double softplus(double z) noexcept {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline void check_training_data(std::span<const LabeledSample> data) {
    require(!data.empty(), Errc::empty_input, "training data is empty");
    const std::size_t d = data.front().features.size();
    require(d >= 1, Errc::dimension_mismatch, "training samples have no features");
    bool has_pos = false;
    bool has_neg = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& s = data[i];
        require(s.features.size() == d, Errc::dimension_mismatch,
                "training sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                    " features, expected " + std::to_string(d));
        for (double v : s.features) {
            require(std::isfinite(v), Errc::non_finite,
                    "training sample " + std::to_string(i) + " has a non-finite feature");
        }
        (s.label == Label::positive ? has_pos : has_neg) = true;
    }
    require(has_pos && has_neg, Errc::single_class, "training data must contain both positive and negative samples");
}

/// Standardized design: one row per sample, column 0 is the constant 1.
inline Eigen::MatrixXd standardized_design(const LogisticModel& model, std::span<const LabeledSample> data) {
    const std::size_t d = model.dimension();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(d + 1));
    for (std::size_t i = 0; i < data.size(); ++i) {
        require(data[i].features.size() == d, Errc::dimension_mismatch, "sample dimension does not match model");
        const auto row = static_cast<Eigen::Index>(i);
        x(row, 0) = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            x(row, static_cast<Eigen::Index>(j + 1)) = (data[i].features[j] - model.feature_means[j]) / model.feature_scales[j];
        }
    }
    return x;
}

inline Eigen::VectorXd targets(std::span<const LabeledSample> data) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        y(static_cast<Eigen::Index>(i)) = data[i].label == Label::positive ? 1.0 : 0.0;
    }
    return y;
}

inline Eigen::VectorXd pack(const LogisticModel& model) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(model.dimension() + 1));
    theta(0) = model.intercept;
    for (std::size_t j = 0; j < model.dimension(); ++j) {
        theta(static_cast<Eigen::Index>(j + 1)) = model.weights[j];
    }
    return theta;
}

inline void unpack(const Eigen::VectorXd& theta, LogisticModel& model) {
    model.intercept = theta(0);
    for (std::size_t j = 0; j < model.dimension(); ++j) {
        model.weights[j] = theta(static_cast<Eigen::Index>(j + 1));
    }
}

class LogisticObjective {
public:
    LogisticObjective(Eigen::MatrixXd design, Eigen::VectorXd y, double l2)
        : x_(std::move(design)), y_(std::move(y)), l2_(l2), n_(static_cast<double>(x_.rows())) {}

    double value(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd z = x_ * theta;
        double total = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            total += softplus(z(i)) - y_(i) * z(i);
        }
        return total / n_ + 0.5 * l2_ * theta.tail(theta.size() - 1).squaredNorm();
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd residual = (x_ * theta).unaryExpr([](double z) { return sigmoid(z); }) - y_;
        Eigen::VectorXd g = x_.transpose() * residual / n_;
        g.tail(g.size() - 1) += l2_ * theta.tail(theta.size() - 1);
        return g;
    }

    Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd p = (x_ * theta).unaryExpr([](double z) { return sigmoid(z); });
        const Eigen::VectorXd w = p.array() * (1.0 - p.array());
        Eigen::MatrixXd h = x_.transpose() * w.asDiagonal() * x_ / n_;
        for (Eigen::Index j = 1; j < h.rows(); ++j) {
            h(j, j) += l2_;
        }
        return h;
    }

    /// True when the linear predictor puts every sample strictly on its own label's side.
    bool separates(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd z = x_ * theta;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            if ((y_(i) > 0.5) ? !(z(i) > 0.0) : !(z(i) < 0.0)) {
                return false;
            }
        }
        return true;
    }

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    double l2_;
    double n_;
};

} // namespace detail

/// Per-feature mean and population standard deviation; a zero spread gets scale 1.
inline void fit_standardization(std::span<const LabeledSample> data, LogisticModel& model) {
    const std::size_t d = data.front().features.size();
    const double n = static_cast<double>(data.size());
    model.feature_means.assign(d, 0.0);
    model.feature_scales.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (const auto& s : data) {
            sum += s.features[j];
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& s : data) {
            ss += (s.features[j] - mean) * (s.features[j] - mean);
        }
        const double sd = std::sqrt(ss / n);
        model.feature_means[j] = mean;
        model.feature_scales[j] = sd > 0.0 ? sd : 1.0;
    }
}

/// Regularized mean negative log-likelihood at the model's parameters.
inline double logistic_loss(const LogisticModel& model, std::span<const LabeledSample> data, double l2_penalty) {
    detail::check_training_data(data);
    model.validate();
    const detail::LogisticObjective objective(detail::standardized_design(model, data), detail::targets(data), l2_penalty);
    return objective.value(detail::pack(model));
}

/// Analytic gradient of logistic_loss with respect to (intercept, weights...),
/// in that order, in standardized coordinates.
inline std::vector<double> logistic_loss_gradient(const LogisticModel& model, std::span<const LabeledSample> data,
                                                  double l2_penalty) {
    detail::check_training_data(data);
    model.validate();
    const detail::LogisticObjective objective(detail::standardized_design(model, data), detail::targets(data), l2_penalty);
    const Eigen::VectorXd g = objective.gradient(detail::pack(model));
    return {g.data(), g.data() + g.size()};
}

inline TrainResult train_logistic(std::span<const LabeledSample> data, const TrainConfig& config = {}) {
    detail::check_training_data(data);
    detail::require(config.max_iterations >= 1, Errc::invalid_argument, "max_iterations must be at least 1");
    detail::require(config.tolerance > 0.0, Errc::invalid_argument, "tolerance must be positive");
    detail::require(config.l2_penalty >= 0.0 && std::isfinite(config.l2_penalty), Errc::invalid_argument,
                    "l2_penalty must be finite and non-negative");

    TrainResult result;
    LogisticModel& model = result.model;
    const std::size_t d = data.front().features.size();
    model.weights.assign(d, 0.0);
    fit_standardization(data, model);

    const detail::LogisticObjective objective(detail::standardized_design(model, data), detail::targets(data),
                                              config.l2_penalty);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
    double f = objective.value(theta);
    Eigen::VectorXd g = objective.gradient(theta);

    TrainReport& report = result.report;
    while (g.lpNorm<Eigen::Infinity>() > config.tolerance && report.iterations < config.max_iterations) {
        ++report.iterations;
        Eigen::VectorXd step;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(objective.hessian(theta));
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = -ldlt.solve(g);
        }
        double slope = step.size() > 0 ? g.dot(step) : 0.0;
        if (!(slope < 0.0) || !step.allFinite()) {
            step = -g;
            slope = -g.squaredNorm();
        }

        // Armijo backtracking.
        double t = 1.0;
        bool moved = false;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            const Eigen::VectorXd candidate = theta + t * step;
            const double fc = objective.value(candidate);
            if (std::isfinite(fc) && fc <= f + 1e-4 * t * slope) {
                theta = candidate;
                f = fc;
                moved = true;
                break;
            }
        }
        g = objective.gradient(theta);
        if (!moved) {
            break; // no representable decrease left
        }
    }

    report.final_gradient_norm = g.lpNorm<Eigen::Infinity>();
    report.converged = report.final_gradient_norm <= config.tolerance;
    report.separation_warning = !report.converged || objective.separates(theta);
    detail::unpack(theta, model);
    return result;
}

/// Score in (0, 1). Values that would round to 0 or 1 are pulled to the nearest interior double.
inline double predict_score(const LogisticModel& model, std::span<const double> features) {
    detail::require(features.size() == model.dimension(), Errc::dimension_mismatch,
                    "feature vector has " + std::to_string(features.size()) + " entries, model expects " +
                        std::to_string(model.dimension()));
    double z = model.intercept;
    for (std::size_t j = 0; j < features.size(); ++j) {
        detail::require(std::isfinite(features[j]), Errc::non_finite, "feature vector has a non-finite value");
        z += model.weights[j] * (features[j] - model.feature_means[j]) / model.feature_scales[j];
    }
    return std::clamp(detail::sigmoid(z), std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

inline std::vector<double> predict_scores(const LogisticModel& model, std::span<const LabeledSample> samples) {
    std::vector<double> scores;
    scores.reserve(samples.size());
    for (const auto& s : samples) {
        scores.push_back(predict_score(model, s.features));
    }
    return scores;
}

/// FNV-1a over the bit patterns of every parameter. Equal fingerprints mean bit-identical models.
inline std::uint64_t fingerprint(const LogisticModel& model) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](double v) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(model.intercept);
    for (double v : model.weights) mix(v);
    for (double v : model.feature_means) mix(v);
    for (double v : model.feature_scales) mix(v);
    return h;
}

inline void to_json(nlohmann::json& j, const LogisticModel& model) {
    j = nlohmann::json{{"weights", model.weights},
                       {"intercept", model.intercept},
                       {"feature_means", model.feature_means},
                       {"feature_scales", model.feature_scales}};
}

inline void from_json(const nlohmann::json& j, LogisticModel& model) {
    j.at("weights").get_to(model.weights);
    j.at("intercept").get_to(model.intercept);
    j.at("feature_means").get_to(model.feature_means);
    j.at("feature_scales").get_to(model.feature_scales);
    model.validate();
}

inline void to_json(nlohmann::json& j, const TrainReport& report) {
    j = nlohmann::json{{"iterations", report.iterations},
                       {"final_gradient_norm", report.final_gradient_norm},
                       {"converged", report.converged},
                       {"separation_warning", report.separation_warning}};
}

} // namespace prevmle
