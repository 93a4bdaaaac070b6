#include "doctest.h"

#include <cmath>

#include "adamab/bandit.hpp"
#include "adamab/theorylab.hpp"
#include "test_util.hpp"

using namespace adamab;
using namespace adamab::bandit;

namespace {

GradientSnapshot make_snapshot(std::vector<Vec> class_gradients,
                               std::vector<std::size_t> counts) {
    GradientSnapshot snap;
    const std::size_t k = class_gradients.size();
    const std::size_t dim = class_gradients.front().size();
    snap.class_gradients = std::move(class_gradients);
    snap.counts = std::move(counts);
    snap.total = 0;
    for (std::size_t c : snap.counts) snap.total += c;
    snap.balanced_gradient.assign(dim, 0.0);
    snap.dataset_gradient.assign(dim, 0.0);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < dim; ++i) {
            snap.balanced_gradient[i] += snap.class_gradients[c][i] / static_cast<double>(k);
            snap.dataset_gradient[i] += snap.class_gradients[c][i] *
                                        static_cast<double>(snap.counts[c]) /
                                        static_cast<double>(snap.total);
        }
    return snap;
}

data::ClassDataset dataset_from(const std::vector<std::pair<int, Vec>>& labeled, int k) {
    std::vector<data::Record> records;
    for (const auto& [label, emb] : labeled) {
        data::Record rec;
        rec.label = label;
        rec.embedding = emb;
        records.push_back(std::move(rec));
    }
    return data::ClassDataset::load_initial(records, k);
}

}  // namespace

TEST_CASE("snapshot: single-sample classes reproduce per-sample gradients") {
    auto inst = testutil::safe_pair_instance(4, 2, 201);
    Rng rng(202);
    Vec q1(4), q2(4);
    for (double& v : q1) v = rng.uniform(-1.0, 1.0);
    for (double& v : q2) v = rng.uniform(-1.0, 1.0);
    const auto ds = dataset_from({{1, q1}, {2, q2}}, 2);

    const auto snap = snapshot_gradients(inst.pair, ds, inst.labels);
    const Vec g1 = calib::sample_gradient(inst.pair, q1, 1, inst.labels);
    const Vec g2 = calib::sample_gradient(inst.pair, q2, 2, inst.labels);
    REQUIRE(snap.class_gradients.size() == 2);
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(std::abs(snap.class_gradients[0][i] - g1[i]) < 1e-14);
        CHECK(std::abs(snap.class_gradients[1][i] - g2[i]) < 1e-14);
        CHECK(std::abs(snap.balanced_gradient[i] - 0.5 * (g1[i] + g2[i])) < 1e-13);
    }
}

TEST_CASE("snapshot: balanced counts make the dataset gradient the balanced one") {
    auto inst = testutil::safe_pair_instance(4, 3, 203);
    Rng rng(204);
    std::vector<std::pair<int, Vec>> labeled;
    for (int c = 1; c <= 3; ++c)
        for (int i = 0; i < 4; ++i) {
            Vec q(4);
            for (double& v : q) v = rng.uniform(-1.0, 1.0);
            labeled.emplace_back(c, std::move(q));
        }
    const auto ds = dataset_from(labeled, 3);
    const auto snap = snapshot_gradients(inst.pair, ds, inst.labels);
    for (std::size_t i = 0; i < snap.balanced_gradient.size(); ++i)
        CHECK(std::abs(snap.balanced_gradient[i] - snap.dataset_gradient[i]) < 1e-12);
}

TEST_CASE("snapshot aggregates match a straight-line recomputation on imbalanced counts") {
    auto inst = testutil::safe_pair_instance(4, 3, 205);
    Rng rng(206);
    std::vector<std::pair<int, Vec>> labeled;
    const int counts[3] = {1, 2, 3};
    for (int c = 1; c <= 3; ++c)
        for (int i = 0; i < counts[c - 1]; ++i) {
            Vec q(4);
            for (double& v : q) v = rng.uniform(-1.0, 1.0);
            labeled.emplace_back(c, std::move(q));
        }
    const auto ds = dataset_from(labeled, 3);
    const auto snap = snapshot_gradients(inst.pair, ds, inst.labels);

    // scalar oracle: recompute every aggregate from per-sample gradients
    const std::size_t dim = inst.pair.param_count();
    std::vector<Vec> class_means(3, Vec(dim, 0.0));
    Vec dataset_mean(dim, 0.0), balanced(dim, 0.0);
    for (const auto& [label, emb] : labeled) {
        const Vec g = calib::sample_gradient(inst.pair, emb, label, inst.labels);
        for (std::size_t i = 0; i < dim; ++i) {
            class_means[static_cast<std::size_t>(label - 1)][i] +=
                g[i] / static_cast<double>(counts[label - 1]);
            dataset_mean[i] += g[i] / 6.0;
        }
    }
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < dim; ++i)
            balanced[i] += class_means[static_cast<std::size_t>(c)][i] / 3.0;

    for (std::size_t i = 0; i < dim; ++i) {
        CHECK(std::abs(snap.dataset_gradient[i] - dataset_mean[i]) < 1e-12);
        CHECK(std::abs(snap.balanced_gradient[i] - balanced[i]) < 1e-12);
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(snap.class_gradients[static_cast<std::size_t>(c)][i] -
                           class_means[static_cast<std::size_t>(c)][i]) < 1e-12);
    }
    CHECK(snap.total == 6);
}

TEST_CASE("snapshot rejects an empty class") {
    auto inst = testutil::safe_pair_instance(4, 2, 207);
    // bypass load_initial's coverage check is impossible; mismatched label
    // count is the reachable precondition violation
    const auto ds = dataset_from({{1, Vec(4, 0.1)}, {2, Vec(4, 0.2)}}, 2);
    auto three = testutil::safe_pair_instance(4, 3, 208);
    CHECK_THROWS_AS(snapshot_gradients(three.pair, ds, three.labels), std::invalid_argument);
}

TEST_CASE("shifting: identical class gradients mean zero shifting everywhere") {
    const Vec g{0.3, -0.7};
    const auto snap = make_snapshot({g, g, g}, {2, 5, 1});
    for (int c = 1; c <= 3; ++c) CHECK(shifting_estimate(snap, c, 4) == doctest::Approx(0.0));
}

TEST_CASE("shifting: the two-class hand case gives 0.25") {
    const auto snap = make_snapshot({{1.0}, {-1.0}}, {1, 1});
    CHECK(snap.dataset_gradient[0] == doctest::Approx(0.0));
    CHECK(snap.balanced_gradient[0] == doctest::Approx(0.0));
    CHECK(shifting_estimate(snap, 1, 2) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(shifting_estimate(snap, 2, 2) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("shifting: the large delta-n limit is the class-to-balanced distance") {
    Rng rng(211);
    std::vector<Vec> grads(3, Vec(4, 0.0));
    for (auto& g : grads)
        for (double& x : g) x = rng.uniform(-1.0, 1.0);
    const auto snap = make_snapshot(grads, {3, 4, 5});
    for (int c = 1; c <= 3; ++c) {
        double want = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            const double r = snap.class_gradients[static_cast<std::size_t>(c - 1)][i] -
                             snap.balanced_gradient[i];
            want += r * r;
        }
        CHECK(shifting_estimate(snap, c, 1000000) == doctest::Approx(want).epsilon(1e-4));
    }
    CHECK_THROWS_AS(shifting_estimate(snap, 1, 0), std::invalid_argument);
}

TEST_CASE("select: alpha=0 is pure greedy on the estimated shifting") {
    Rng rng(213);
    std::vector<Vec> grads(4, Vec(3, 0.0));
    for (auto& g : grads)
        for (double& x : g) x = rng.uniform(-1.0, 1.0);
    const auto snap = make_snapshot(grads, {5, 5, 5, 5});
    const auto report = select_class(snap, 0.0, 2);
    int want = 1;
    for (int c = 2; c <= 4; ++c)
        if (report.shifting[static_cast<std::size_t>(c - 1)] <
            report.shifting[static_cast<std::size_t>(want - 1)])
            want = c;
    CHECK(report.chosen_class == want);
    for (double b : report.bonus) CHECK(b == 0.0);
}

TEST_CASE("select: equal shifting goes to the least-sampled class") {
    const Vec g{0.5, 0.5};
    const auto snap = make_snapshot({g, g, g}, {6, 2, 4});
    const auto report = select_class(snap, 30.0, 5);
    CHECK(report.chosen_class == 2);
    for (double b : report.bonus) CHECK(b > 0.0);
}

TEST_CASE("select: homogeneous gradients with tied counts go to the lowest id") {
    const Vec g{-0.25, 1.0};
    const auto snap = make_snapshot({g, g, g}, {3, 3, 3});
    CHECK(select_class(snap, 100.0, 5).chosen_class == 1);
}

TEST_CASE("select matches a scalar recomputation on a hand-built K=3 case") {
    const std::vector<Vec> grads{{0.9, -0.1}, {-0.4, 0.6}, {0.1, 0.2}};
    const std::vector<std::size_t> counts{2, 3, 7};
    const double alpha = 30.0;
    const std::size_t delta_n = 5;
    const auto snap = make_snapshot(grads, counts);
    const auto report = select_class(snap, alpha, delta_n);

    // independent scalar recomputation of all three scores
    const double n = 12.0, dn = 5.0;
    double best_score = -1e300;
    int best = 0;
    for (int c = 0; c < 3; ++c) {
        Vec dataset(2, 0.0), balanced(2, 0.0);
        for (int cc = 0; cc < 3; ++cc)
            for (int i = 0; i < 2; ++i) {
                dataset[static_cast<std::size_t>(i)] +=
                    grads[static_cast<std::size_t>(cc)][static_cast<std::size_t>(i)] *
                    static_cast<double>(counts[static_cast<std::size_t>(cc)]) / n;
                balanced[static_cast<std::size_t>(i)] +=
                    grads[static_cast<std::size_t>(cc)][static_cast<std::size_t>(i)] / 3.0;
            }
        double shift = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double r =
                dn / (n + dn) * grads[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] +
                n / (n + dn) * dataset[static_cast<std::size_t>(i)] -
                balanced[static_cast<std::size_t>(i)];
            shift += r * r;
        }
        const double bonus =
            alpha / std::sqrt((n + dn) * static_cast<double>(counts[static_cast<std::size_t>(c)]));
        const double score = -shift + bonus;
        CHECK(std::abs(report.shifting[static_cast<std::size_t>(c)] - shift) < 1e-10);
        CHECK(std::abs(report.bonus[static_cast<std::size_t>(c)] - bonus) < 1e-10);
        CHECK(std::abs(report.score[static_cast<std::size_t>(c)] - score) < 1e-10);
        if (score > best_score) {
            best_score = score;
            best = c + 1;
        }
    }
    CHECK(report.chosen_class == best);
    CHECK_THROWS_AS(select_class(snap, -1.0, delta_n), std::invalid_argument);
}

TEST_CASE("scaling every gradient by c scales shifting by c^2, greedy argmax fixed") {
    Rng rng(219);
    std::vector<Vec> grads(3, Vec(4, 0.0));
    for (auto& g : grads)
        for (double& x : g) x = rng.uniform(-1.0, 1.0);
    const std::vector<std::size_t> counts{4, 2, 6};
    const auto snap = make_snapshot(grads, counts);

    const double c = 3.7;
    std::vector<Vec> scaled = grads;
    for (auto& g : scaled)
        for (double& x : g) x *= c;
    const auto snap_scaled = make_snapshot(scaled, counts);

    for (int cls = 1; cls <= 3; ++cls)
        CHECK(shifting_estimate(snap_scaled, cls, 5) ==
              doctest::Approx(c * c * shifting_estimate(snap, cls, 5)).epsilon(1e-10));
    CHECK(select_class(snap, 0.0, 5).chosen_class ==
          select_class(snap_scaled, 0.0, 5).chosen_class);
}

TEST_CASE("report replay: the logged scores pin down the selected class") {
    Rng rng(223);
    for (int round = 0; round < 25; ++round) {
        std::vector<Vec> grads(5, Vec(3, 0.0));
        for (auto& g : grads)
            for (double& x : g) x = rng.uniform(-2.0, 2.0);
        std::vector<std::size_t> counts(5);
        for (auto& cnt : counts) cnt = 1 + rng.below(9);
        const auto snap = make_snapshot(grads, counts);
        const auto report = select_class(snap, 30.0, 5);
        REQUIRE(report.score.size() == 5);
        REQUIRE(report.shifting.size() == 5);
        REQUIRE(report.bonus.size() == 5);
        CHECK(report.counts_prev == counts);
        int replay = 1;
        for (int c = 2; c <= 5; ++c)
            if (report.score[static_cast<std::size_t>(c - 1)] >
                report.score[static_cast<std::size_t>(replay - 1)])
                replay = c;
        CHECK(replay == report.chosen_class);
    }
}

TEST_CASE("adversarial constant shifting keeps counts bounded when alpha > 0") {
    theory::FixedShiftingProblem problem;
    problem.values = {0.0, 0.02, 0.05, 0.08};
    problem.obs_noise = 0.0;
    problem.initial_per_arm = 5;
    const auto trace = theory::fixed_regret_sim(problem, 30.0, 1, 1000, 5, 71);
    const double peak =
        *std::max_element(trace.max_count_ratio.begin(), trace.max_count_ratio.end());
    CHECK(peak <= 10.0);

    // greedy on the same instance locks onto arm 1 and the ratio keeps growing
    const auto greedy =
        theory::fixed_regret_sim(problem, 0.0, 1, 1000, 5, 71, theory::BonusKind::none);
    CHECK(greedy.max_count_ratio.back() > 50.0);
}

TEST_CASE("theoretical alpha equals the closed form") {
    const std::size_t d = 4, horizon = 1000;
    const double g = 1.5;
    const double want =
        4.0 * 4.0 * 1.5 * 1.5 *
        std::sqrt(2.0 * std::log(2.0 * std::pow(1000.0, 4.0) * 4.0));
    CHECK(theoretical_alpha(d, g, horizon) == doctest::Approx(want).epsilon(1e-12));
}
