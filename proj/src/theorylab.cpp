#include "adamab/theorylab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adamab/bandit.hpp"

namespace adamab::theory {

// ---------------------------------------------------------------------------
// Quadratic testbed

QuadraticProblem QuadraticProblem::random(std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw std::invalid_argument("QuadraticProblem: dim must be positive");
    Rng rng(seed);
    // A = M^T M is symmetric PSD
    std::vector<Vec> m(dim, Vec(dim, 0.0));
    for (auto& row : m)
        for (double& x : row) x = rng.normal() / std::sqrt(static_cast<double>(dim));
    QuadraticProblem p;
    p.matrix_.assign(dim, Vec(dim, 0.0));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) s += m[k][i] * m[k][j];
            p.matrix_[i][j] = s;
        }
    p.w_star_.assign(dim, 0.0);
    for (double& x : p.w_star_) x = rng.normal();

    // power iteration for the top eigenvalue; inflated a hair so that the
    // stored beta is never below the true one
    Vec v(dim, 0.0);
    for (double& x : v) x = rng.normal();
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
        Vec av(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) av[i] = dot(p.matrix_[i], v);
        const double nrm = std::sqrt(norm_sq(av));
        if (nrm == 0.0) break;
        for (std::size_t i = 0; i < dim; ++i) v[i] = av[i] / nrm;
        lambda = nrm;
    }
    p.beta_ = lambda * (1.0 + 1e-9);
    return p;
}

double QuadraticProblem::loss(const Vec& w) const {
    check_dim(w.size(), dim(), "QuadraticProblem::loss");
    Vec diff(dim(), 0.0);
    for (std::size_t i = 0; i < dim(); ++i) diff[i] = w[i] - w_star_[i];
    double acc = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) acc += diff[i] * dot(matrix_[i], diff);
    return 0.5 * acc;
}

Vec QuadraticProblem::gradient(const Vec& w) const {
    check_dim(w.size(), dim(), "QuadraticProblem::gradient");
    Vec diff(dim(), 0.0);
    for (std::size_t i = 0; i < dim(); ++i) diff[i] = w[i] - w_star_[i];
    Vec g(dim(), 0.0);
    for (std::size_t i = 0; i < dim(); ++i) g[i] = dot(matrix_[i], diff);
    return g;
}

// ---------------------------------------------------------------------------
// Vector Hoeffding

double hoeffding_epsilon(std::size_t dim, double bound_g, std::size_t n, std::size_t horizon) {
    const double d = static_cast<double>(dim);
    const double t4 = std::pow(static_cast<double>(horizon), 4.0);
    return std::sqrt(2.0 * d * bound_g * bound_g * std::log(2.0 * t4 * d) /
                     static_cast<double>(n));
}

HoeffdingResult hoeffding_trial(std::size_t dim, double bound_g, std::size_t n,
                                std::size_t horizon, std::size_t trials, std::uint64_t seed,
                                bool zero_variance) {
    if (dim == 0 || n == 0 || trials == 0)
        throw std::invalid_argument("hoeffding_trial: dim, n, trials must be positive");
    HoeffdingResult result;
    result.epsilon = hoeffding_epsilon(dim, bound_g, n, horizon);
    result.bound = 1.0 / std::pow(static_cast<double>(horizon), 4.0);
    result.trials = trials;

    Rng rng(seed);
    // E[x] per coordinate: 0 for the uniform draw, a fixed constant for the
    // degenerate zero-variance draw
    const double constant = 0.5 * bound_g;
    Vec mean(dim, 0.0);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                mean[j] += zero_variance ? constant : rng.uniform(-bound_g, bound_g);
        double dev_sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double dev = mean[j] / static_cast<double>(n) - (zero_variance ? constant : 0.0);
            dev_sq += dev * dev;
        }
        if (std::sqrt(dev_sq) >= result.epsilon) result.violations++;
    }
    result.violation_rate = static_cast<double>(result.violations) / static_cast<double>(trials);
    return result;
}

// ---------------------------------------------------------------------------
// Biased gradient descent

BiasedGdTrace biased_gd_trace(const QuadraticProblem& problem, const Vec& w_start,
                              const std::vector<double>& bias_norms, double eta,
                              std::uint64_t seed) {
    check_dim(w_start.size(), problem.dim(), "biased_gd_trace start");
    if (eta <= 0.0) throw std::invalid_argument("biased_gd_trace: eta must be positive");
    if (eta > 1.0 / problem.smoothness())
        throw std::invalid_argument(
            "biased_gd_trace: eta exceeds 1/beta, the prefix bound does not apply");
    for (double b : bias_norms)
        if (b < 0.0) throw std::invalid_argument("biased_gd_trace: negative bias norm");

    Rng rng(seed);
    const double l1 = problem.loss(w_start);
    Vec w = w_start;
    BiasedGdTrace trace;
    trace.holds = true;
    double inf_so_far = std::numeric_limits<double>::infinity();
    double bias_sq_sum = 0.0;
    for (std::size_t t = 0; t < bias_norms.size(); ++t) {
        const Vec g = problem.gradient(w);
        const double gn = norm_sq(g);
        inf_so_far = std::min(inf_so_far, gn);
        bias_sq_sum += bias_norms[t] * bias_norms[t];
        const double steps = static_cast<double>(t + 1);
        const double bound = 2.0 * l1 / (steps * eta) + bias_sq_sum / steps;
        trace.grad_norm_sq.push_back(gn);
        trace.inf_grad_norm_sq.push_back(inf_so_far);
        trace.prefix_bound.push_back(bound);
        if (inf_so_far > bound * (1.0 + 1e-12) + 1e-30) trace.holds = false;

        // bias of exactly the scheduled norm in a random direction
        Vec dir(problem.dim(), 0.0);
        double dn = 0.0;
        while (dn == 0.0) {
            for (double& x : dir) x = rng.normal();
            dn = std::sqrt(norm_sq(dir));
        }
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] -= eta * (g[i] + bias_norms[t] * dir[i] / dn);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Acquisition-policy simulations

GradientArmProblem GradientArmProblem::random(std::size_t arms, std::size_t dim,
                                              double mean_spread, double noise,
                                              std::size_t initial_per_arm, std::uint64_t seed) {
    if (arms < 2) throw std::invalid_argument("GradientArmProblem: need at least 2 arms");
    GradientArmProblem p;
    p.dim = dim;
    p.noise = noise;
    p.initial_per_arm = initial_per_arm;
    Rng rng(seed);
    p.true_means.assign(arms, Vec(dim, 0.0));
    double max_abs = 0.0;
    for (auto& mean : p.true_means)
        for (double& x : mean) {
            x = rng.uniform(-mean_spread, mean_spread);
            max_abs = std::max(max_abs, std::abs(x));
        }
    p.bound_g = max_abs + noise;
    p.validate();
    return p;
}

void GradientArmProblem::validate() const {
    if (arms() < 2) throw std::invalid_argument("GradientArmProblem: need at least 2 arms");
    if (dim == 0) throw std::invalid_argument("GradientArmProblem: dim must be positive");
    if (noise < 0.0) throw std::invalid_argument("GradientArmProblem: negative noise");
    if (initial_per_arm < 1)
        throw std::invalid_argument("GradientArmProblem: initial_per_arm must be >= 1");
    for (const Vec& mean : true_means) {
        check_dim(mean.size(), dim, "GradientArmProblem mean");
        for (double x : mean)
            if (std::abs(x) + noise > bound_g + 1e-12)
                throw std::invalid_argument(
                    "GradientArmProblem: a draw could exceed the declared gradient bound");
    }
}

namespace {

double bonus_value(BonusKind kind, double alpha, std::size_t n, std::size_t delta_n,
                   std::size_t n_c) {
    const double np = static_cast<double>(n + delta_n);
    const double nc = static_cast<double>(n_c);
    switch (kind) {
        case BonusKind::relaxed: return alpha / std::sqrt(np * nc);
        case BonusKind::tight: return alpha / (np * std::sqrt(nc));
        case BonusKind::none: return 0.0;
    }
    throw std::logic_error("bonus_value: unreachable");
}

int argmax_lowest_tie(const std::vector<double>& scores) {
    int best = 1;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[static_cast<std::size_t>(best - 1)]) best = static_cast<int>(c) + 1;
    return best;
}

}  // namespace

RegretTrace regret_sim(const GradientArmProblem& problem, double alpha, std::size_t delta_n,
                       std::size_t rounds, std::size_t seeds, std::uint64_t seed0,
                       BonusKind bonus) {
    problem.validate();
    if (delta_n < 1) throw std::invalid_argument("regret_sim: delta_n must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("regret_sim: alpha must be >= 0");
    const std::size_t k = problem.arms();
    const std::size_t d = problem.dim;

    Vec true_balanced(d, 0.0);
    for (const Vec& mean : problem.true_means)
        for (std::size_t j = 0; j < d; ++j) true_balanced[j] += mean[j] / static_cast<double>(k);

    RegretTrace trace;
    trace.mean_regret.assign(rounds, 0.0);
    trace.mean_count_ratio.assign(rounds, 0.0);
    trace.max_count_ratio.assign(rounds, 0.0);
    trace.seed_regret.assign(seeds, std::vector<double>(rounds, 0.0));

    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(mix_seed(seed0, s));
        std::vector<Vec> sums(k, Vec(d, 0.0));
        std::vector<std::size_t> counts(k, 0);
        Vec total_sum(d, 0.0);
        std::size_t total = 0;
        const auto draw_arm = [&](std::size_t arm) {
            for (std::size_t j = 0; j < d; ++j) {
                const double x =
                    problem.true_means[arm][j] + rng.uniform(-problem.noise, problem.noise);
                sums[arm][j] += x;
                total_sum[j] += x;
            }
            counts[arm]++;
            total++;
        };
        for (std::size_t arm = 0; arm < k; ++arm)
            for (std::size_t i = 0; i < problem.initial_per_arm; ++i) draw_arm(arm);

        for (std::size_t t = 0; t < rounds; ++t) {
            // policy side: the production shifting estimator over a snapshot
            bandit::GradientSnapshot snap;
            snap.total = total;
            snap.counts = counts;
            snap.class_gradients.assign(k, Vec(d, 0.0));
            snap.balanced_gradient.assign(d, 0.0);
            snap.dataset_gradient.assign(d, 0.0);
            for (std::size_t c = 0; c < k; ++c) {
                for (std::size_t j = 0; j < d; ++j) {
                    snap.class_gradients[c][j] = sums[c][j] / static_cast<double>(counts[c]);
                    snap.balanced_gradient[j] +=
                        snap.class_gradients[c][j] / static_cast<double>(k);
                }
            }
            for (std::size_t j = 0; j < d; ++j)
                snap.dataset_gradient[j] = total_sum[j] / static_cast<double>(total);

            int chosen;
            if (bonus == BonusKind::relaxed) {
                chosen = bandit::select_class(snap, alpha, delta_n).chosen_class;
            } else {
                std::vector<double> scores(k, 0.0);
                for (std::size_t c = 0; c < k; ++c)
                    scores[c] =
                        -bandit::shifting_estimate(snap, static_cast<int>(c) + 1, delta_n) +
                        bonus_value(bonus, alpha, total, delta_n, counts[c]);
                chosen = argmax_lowest_tie(scores);
            }

            // truth side: same mixture formula with the true arm means
            const double w_new =
                static_cast<double>(delta_n) / static_cast<double>(total + delta_n);
            const double w_old = static_cast<double>(total) / static_cast<double>(total + delta_n);
            Vec true_shift(k, 0.0);
            for (std::size_t c = 0; c < k; ++c) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double r = w_new * problem.true_means[c][j] +
                                     w_old * total_sum[j] / static_cast<double>(total) -
                                     true_balanced[j];
                    acc += r * r;
                }
                true_shift[c] = acc;
            }
            const double best = *std::min_element(true_shift.begin(), true_shift.end());
            const double regret = true_shift[static_cast<std::size_t>(chosen - 1)] - best;

            trace.seed_regret[s][t] = regret;
            trace.mean_regret[t] += regret / static_cast<double>(seeds);
            const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
            const double ratio = static_cast<double>(*hi) / static_cast<double>(*lo);
            trace.mean_count_ratio[t] += ratio / static_cast<double>(seeds);
            trace.max_count_ratio[t] = std::max(trace.max_count_ratio[t], ratio);

            for (std::size_t i = 0; i < delta_n; ++i) draw_arm(static_cast<std::size_t>(chosen - 1));
        }
    }
    return trace;
}

FixedShiftingProblem FixedShiftingProblem::adversarial() {
    // Two arms whose true shifting gap never shrinks: arm 2 carries a
    // persistent 0.1 disadvantage. A bonus decaying like 1/(n sqrt(n_C))
    // drops below that gap after a few hundred draws and never samples arm 2
    // again; the relaxed bonus stays above it through the whole horizon.
    FixedShiftingProblem p;
    p.values = {0.0, 0.1};
    p.obs_noise = 0.05;
    p.initial_per_arm = 2;
    return p;
}

void FixedShiftingProblem::validate() const {
    if (arms() < 2) throw std::invalid_argument("FixedShiftingProblem: need at least 2 arms");
    if (obs_noise < 0.0) throw std::invalid_argument("FixedShiftingProblem: negative obs_noise");
    if (initial_per_arm < 1)
        throw std::invalid_argument("FixedShiftingProblem: initial_per_arm must be >= 1");
    if (!pinned_initial_means.empty() && pinned_initial_means.size() != arms())
        throw std::invalid_argument("FixedShiftingProblem: pinned means must cover every arm");
}

RegretTrace fixed_regret_sim(const FixedShiftingProblem& problem, double alpha,
                             std::size_t delta_n, std::size_t rounds, std::size_t seeds,
                             std::uint64_t seed0, BonusKind bonus) {
    problem.validate();
    if (delta_n < 1) throw std::invalid_argument("fixed_regret_sim: delta_n must be >= 1");
    if (alpha < 0.0) throw std::invalid_argument("fixed_regret_sim: alpha must be >= 0");
    const std::size_t k = problem.arms();
    const double best = *std::min_element(problem.values.begin(), problem.values.end());

    RegretTrace trace;
    trace.mean_regret.assign(rounds, 0.0);
    trace.mean_count_ratio.assign(rounds, 0.0);
    trace.max_count_ratio.assign(rounds, 0.0);
    trace.seed_regret.assign(seeds, std::vector<double>(rounds, 0.0));

    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(mix_seed(seed0, s));
        std::vector<double> obs_sum(k, 0.0);
        std::vector<std::size_t> counts(k, 0);
        const auto draw_arm = [&](std::size_t arm) {
            obs_sum[arm] +=
                problem.values[arm] + rng.uniform(-problem.obs_noise, problem.obs_noise);
            counts[arm]++;
        };
        for (std::size_t arm = 0; arm < k; ++arm) {
            if (problem.pinned_initial_means.empty()) {
                for (std::size_t i = 0; i < problem.initial_per_arm; ++i) draw_arm(arm);
            } else {
                obs_sum[arm] = problem.pinned_initial_means[arm] *
                               static_cast<double>(problem.initial_per_arm);
                counts[arm] = problem.initial_per_arm;
            }
        }

        for (std::size_t t = 0; t < rounds; ++t) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < k; ++c) total += counts[c];
            std::vector<double> scores(k, 0.0);
            for (std::size_t c = 0; c < k; ++c)
                scores[c] = -(obs_sum[c] / static_cast<double>(counts[c])) +
                            bonus_value(bonus, alpha, total, delta_n, counts[c]);
            const int chosen = argmax_lowest_tie(scores);

            const double regret = problem.values[static_cast<std::size_t>(chosen - 1)] - best;
            trace.seed_regret[s][t] = regret;
            trace.mean_regret[t] += regret / static_cast<double>(seeds);
            const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
            const double ratio = static_cast<double>(*hi) / static_cast<double>(*lo);
            trace.mean_count_ratio[t] += ratio / static_cast<double>(seeds);
            trace.max_count_ratio[t] = std::max(trace.max_count_ratio[t], ratio);

            for (std::size_t i = 0; i < delta_n; ++i) draw_arm(static_cast<std::size_t>(chosen - 1));
        }
    }
    return trace;
}

CbCompareResult confidence_bound_compare(const FixedShiftingProblem& problem, double alpha,
                                         std::size_t delta_n, std::size_t rounds,
                                         std::size_t seeds, std::uint64_t seed0) {
    CbCompareResult result;
    result.relaxed =
        fixed_regret_sim(problem, alpha, delta_n, rounds, seeds, seed0, BonusKind::relaxed);
    result.tight =
        fixed_regret_sim(problem, alpha, delta_n, rounds, seeds, seed0, BonusKind::tight);
    return result;
}

// ---------------------------------------------------------------------------
// Summaries

double loglog_slope(const std::vector<double>& series, std::size_t t_min) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t count = 0;
    for (std::size_t i = t_min >= 1 ? t_min - 1 : 0; i < series.size(); ++i) {
        if (series[i] <= 0.0) continue;
        const double x = std::log(static_cast<double>(i + 1));
        const double y = std::log(series[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        count++;
    }
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) return 0.0;
    return (n * sxy - sx * sy) / denom;
}

RegretDecaySummary regret_decay_summary(const RegretTrace& trace, std::size_t early_round,
                                        double min_factor, double max_slope) {
    RegretDecaySummary summary;
    if (trace.mean_regret.size() < early_round || early_round < 1) return summary;
    summary.early = trace.mean_regret[early_round - 1];
    summary.late = trace.mean_regret.back();
    summary.decay_factor =
        summary.late > 0.0 ? summary.early / summary.late : std::numeric_limits<double>::infinity();
    summary.slope = loglog_slope(trace.mean_regret, early_round);
    summary.pass = summary.decay_factor >= min_factor && summary.slope <= max_slope;
    return summary;
}

}  // namespace adamab::theory
