#pragma once

// Empirical checks of the convergence mathematics: a vector Hoeffding
// concentration trial, the biased-gradient-descent prefix bound on exactly
// smooth quadratics, the acquisition policy's regret decay under sampled
// gradients, and the relaxed-vs-tight confidence bound contrast on
// adversarial fixed-shifting instances.

#include <cstdint>
#include <vector>

#include "adamab/common.hpp"

namespace adamab::theory {

// ---------------------------------------------------------------------------
// Smooth testbed

// L(w) = 0.5 (w - w*)^T A (w - w*), A symmetric PSD. The gradient and the
// smoothness constant (largest eigenvalue) are exact, and L >= 0 everywhere.
class QuadraticProblem {
public:
    static QuadraticProblem random(std::size_t dim, std::uint64_t seed);

    std::size_t dim() const { return w_star_.size(); }
    double loss(const Vec& w) const;
    Vec gradient(const Vec& w) const;
    double smoothness() const { return beta_; }
    const Vec& minimizer() const { return w_star_; }

private:
    std::vector<Vec> matrix_;  // A, row-major
    Vec w_star_;
    double beta_ = 0.0;
};

// ---------------------------------------------------------------------------
// Vector Hoeffding (concentration of bounded i.i.d. vector means)

// epsilon = sqrt(2 d G^2 log(2 T^4 d) / n)
double hoeffding_epsilon(std::size_t dim, double bound_g, std::size_t n, std::size_t horizon);

struct HoeffdingResult {
    double epsilon = 0.0;
    double bound = 0.0;  // 1 / T^4
    std::size_t trials = 0;
    std::size_t violations = 0;
    double violation_rate = 0.0;
};

// Each trial draws n i.i.d. vectors with per-coordinate uniform noise in
// [-G, G] (zero mean) and tests ||mean - E|| >= epsilon. zero_variance
// replaces the noise with a constant vector, giving a degenerate check.
HoeffdingResult hoeffding_trial(std::size_t dim, double bound_g, std::size_t n,
                                std::size_t horizon, std::size_t trials, std::uint64_t seed,
                                bool zero_variance = false);

// ---------------------------------------------------------------------------
// Biased gradient descent

struct BiasedGdTrace {
    std::vector<double> grad_norm_sq;      // ||grad L(w_t)||^2 per step
    std::vector<double> inf_grad_norm_sq;  // running prefix infimum
    std::vector<double> prefix_bound;      // 2 L(w_1)/(t eta) + mean of bias^2 so far
    bool holds = false;                    // inf <= bound at every prefix
};

// Runs w_{t+1} = w_t - eta (grad L(w_t) + b_t) with ||b_t|| = bias_norms[t]
// in a seeded random direction. Refuses eta > 1/beta, where the prefix bound
// does not apply.
BiasedGdTrace biased_gd_trace(const QuadraticProblem& problem, const Vec& w_start,
                              const std::vector<double>& bias_norms, double eta,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Acquisition-policy simulations

enum class BonusKind {
    relaxed,  // alpha / sqrt((n + dn) n_C)
    tight,    // alpha / ((n + dn) sqrt(n_C))
    none,     // pure greedy on the estimated shifting
};

struct RegretTrace {
    std::vector<double> mean_regret;               // per round, averaged over seeds
    std::vector<double> mean_count_ratio;          // per round, averaged over seeds
    std::vector<double> max_count_ratio;           // per round, max over seeds
    std::vector<std::vector<double>> seed_regret;  // [seed][round]
};

// K arms of bounded gradient vectors: arm C draws true_means[C] plus
// per-coordinate uniform noise in [-noise, noise]. The linf bound covers
// every possible draw by construction. The policy sees empirical per-arm
// means over everything drawn so far, exactly as the production estimator
// does over a dataset.
struct GradientArmProblem {
    std::size_t dim = 0;
    double bound_g = 1.0;
    std::vector<Vec> true_means;
    double noise = 0.0;
    std::size_t initial_per_arm = 1;

    static GradientArmProblem random(std::size_t arms, std::size_t dim, double mean_spread,
                                     double noise, std::size_t initial_per_arm,
                                     std::uint64_t seed);
    std::size_t arms() const { return true_means.size(); }
    void validate() const;
};

// Runs the selection policy with the chosen bonus against sampled gradients.
// Instantaneous regret compares the true post-augmentation shifting of the
// chosen arm against the best arm, with the new draws' expectation taken in
// closed form (their noise is policy-independent).
RegretTrace regret_sim(const GradientArmProblem& problem, double alpha, std::size_t delta_n,
                       std::size_t rounds, std::size_t seeds, std::uint64_t seed0,
                       BonusKind bonus = BonusKind::relaxed);

// Arms with a FIXED true shifting value each; the policy sees the running
// mean of per-draw observations value + U(-obs_noise, obs_noise). This is
// the adversarial-constant abstraction: the value gaps never shrink, so an
// exploration bonus that decays too fast starves arms forever.
struct FixedShiftingProblem {
    std::vector<double> values;             // true shifting per arm
    double obs_noise = 0.0;                 // halfwidth of observation noise
    std::size_t initial_per_arm = 1;
    std::vector<double> pinned_initial_means;  // optional frozen initial estimates

    static FixedShiftingProblem adversarial();  // instance used by the bound contrast
    std::size_t arms() const { return values.size(); }
    void validate() const;
};

RegretTrace fixed_regret_sim(const FixedShiftingProblem& problem, double alpha,
                             std::size_t delta_n, std::size_t rounds, std::size_t seeds,
                             std::uint64_t seed0, BonusKind bonus = BonusKind::relaxed);

struct CbCompareResult {
    RegretTrace relaxed;
    RegretTrace tight;
};

// Same instance, same seeds, the two bonus shapes at the same alpha (the
// analysis' choice is theoretical_alpha).
CbCompareResult confidence_bound_compare(const FixedShiftingProblem& problem, double alpha,
                                         std::size_t delta_n, std::size_t rounds,
                                         std::size_t seeds, std::uint64_t seed0);

// ---------------------------------------------------------------------------
// Summaries

// OLS slope of log(series[t]) on log(t) over 1-based rounds t >= t_min with
// positive values.
double loglog_slope(const std::vector<double>& series, std::size_t t_min);

struct RegretDecaySummary {
    double early = 0.0;  // mean regret at the early reference round
    double late = 0.0;   // mean regret at the final round
    double decay_factor = 0.0;
    double slope = 0.0;
    bool pass = false;
};

RegretDecaySummary regret_decay_summary(const RegretTrace& trace, std::size_t early_round,
                                        double min_factor, double max_slope);

}  // namespace adamab::theory
