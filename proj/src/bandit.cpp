#include "adamab/bandit.hpp"

#include <cmath>

namespace adamab::bandit {

GradientSnapshot snapshot_gradients(const calib::CalibratorPair& pair,
                                    const data::ClassDataset& ds, const calib::LabelSet& labels) {
    const int k = ds.num_classes();
    if (k != static_cast<int>(labels.size()))
        throw std::invalid_argument("snapshot_gradients: dataset/label class count mismatch");
    const std::size_t dim = pair.param_count();

    GradientSnapshot snap;
    snap.total = ds.size();
    snap.counts = ds.counts();
    snap.class_gradients.assign(static_cast<std::size_t>(k), Vec(dim, 0.0));
    snap.balanced_gradient.assign(dim, 0.0);
    snap.dataset_gradient.assign(dim, 0.0);

    const calib::LabelActivations acts = calib::calibrate_labels(pair, labels);
    double loss_sum = 0.0;
    for (int c = 1; c <= k; ++c) {
        const auto& ids = ds.class_sample_ids(c);
        if (ids.empty())
            throw std::invalid_argument("snapshot_gradients: class " + std::to_string(c) +
                                        " is empty");
        Vec& grad = snap.class_gradients[static_cast<std::size_t>(c - 1)];
        const double scale = 1.0 / static_cast<double>(ids.size());
        for (long id : ids) {
            const data::Sample& s = ds.sample(id);
            loss_sum += calib::sample_gradient_accumulate(pair, s.embedding, s.label, labels,
                                                          acts, scale, grad.data());
        }
    }
    snap.mean_loss = loss_sum / static_cast<double>(snap.total);

    for (int c = 0; c < k; ++c) {
        const Vec& g = snap.class_gradients[static_cast<std::size_t>(c)];
        const double w_bal = 1.0 / static_cast<double>(k);
        const double w_data = static_cast<double>(snap.counts[static_cast<std::size_t>(c)]) /
                              static_cast<double>(snap.total);
        for (std::size_t i = 0; i < dim; ++i) {
            snap.balanced_gradient[i] += w_bal * g[i];
            snap.dataset_gradient[i] += w_data * g[i];
        }
    }
    return snap;
}

double shifting_estimate(const GradientSnapshot& snap, int class_id, std::size_t delta_n) {
    if (delta_n < 1) throw std::invalid_argument("shifting_estimate: delta_n must be >= 1");
    if (class_id < 1 || class_id > static_cast<int>(snap.class_gradients.size()))
        throw std::invalid_argument("shifting_estimate: invalid class " +
                                    std::to_string(class_id));
    const Vec& g_c = snap.class_gradients[static_cast<std::size_t>(class_id - 1)];
    const double n = static_cast<double>(snap.total);
    const double dn = static_cast<double>(delta_n);
    const double w_new = dn / (n + dn);
    const double w_old = n / (n + dn);
    double acc = 0.0;
    for (std::size_t i = 0; i < g_c.size(); ++i) {
        const double r = w_new * g_c[i] + w_old * snap.dataset_gradient[i] -
                         snap.balanced_gradient[i];
        acc += r * r;
    }
    return acc;
}

AcquisitionReport select_class(const GradientSnapshot& snap, double alpha, std::size_t delta_n) {
    if (alpha < 0.0) throw std::invalid_argument("select_class: alpha must be >= 0");
    const std::size_t k = snap.class_gradients.size();
    AcquisitionReport report;
    report.alpha = alpha;
    report.delta_n = delta_n;
    report.counts_prev = snap.counts;
    report.n_prev = snap.total;
    report.shifting.resize(k);
    report.bonus.resize(k);
    report.score.resize(k);
    const double n_plus = static_cast<double>(snap.total + delta_n);
    for (std::size_t c = 0; c < k; ++c) {
        report.shifting[c] = shifting_estimate(snap, static_cast<int>(c) + 1, delta_n);
        report.bonus[c] = alpha / std::sqrt(n_plus * static_cast<double>(snap.counts[c]));
        report.score[c] = -report.shifting[c] + report.bonus[c];
    }
    report.chosen_class = 1;
    for (std::size_t c = 1; c < k; ++c)
        if (report.score[c] > report.score[static_cast<std::size_t>(report.chosen_class - 1)])
            report.chosen_class = static_cast<int>(c) + 1;
    return report;
}

double theoretical_alpha(std::size_t dim, double grad_bound, std::size_t horizon) {
    const double d = static_cast<double>(dim);
    const double t4 = std::pow(static_cast<double>(horizon), 4.0);
    return 4.0 * d * grad_bound * grad_bound * std::sqrt(2.0 * std::log(2.0 * t4 * d));
}

}  // namespace adamab::bandit
