// Train at a 25% prior, then estimate a 75%-positive evaluation bag both ways.

#include <prevmle/prevmle.hpp>

#include <fmt/format.h>

int main() {
    using namespace prevmle;

    const auto train = generate({.seed = 1}, 500, 0.25);
    const auto fit = train_logistic(train);
    const auto train_scores = predict_scores(fit.model, train);
    const auto profile = fit_profile(label_scores(train_scores, train), default_bin_count);

    const auto eval = generate({.seed = 2}, 500, 0.75);
    const auto scores = predict_scores(fit.model, eval);
    fmt::print("true proportion   0.75\n");
    fmt::print("naive estimate    {:.3f}\n", naive_estimate(scores));
    fmt::print("maximum likelihood {:.3f}\n", mle_grid(profile, scores).estimate.pi_hat);
}
