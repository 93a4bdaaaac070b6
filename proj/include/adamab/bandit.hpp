#pragma once

// Class-level acquisition: per-class mean gradients at the current
// parameters, the estimated gradient shifting after a hypothetical
// augmentation of each class, the relaxed exploration bonus, and the argmax
// selection with full per-class reporting.

#include <cstdint>
#include <vector>

#include "adamab/calibrator.hpp"
#include "adamab/common.hpp"
#include "adamab/dataset.hpp"

namespace adamab::bandit {

struct GradientSnapshot {
    std::vector<Vec> class_gradients;  // mean gradient per class, flat over w
    Vec balanced_gradient;             // unweighted mean of the class gradients
    Vec dataset_gradient;              // count-weighted mean over the whole dataset
    std::vector<std::size_t> counts;   // n_C at snapshot time
    std::size_t total = 0;             // n at snapshot time
    double mean_loss = 0.0;            // dataset mean loss, reusable by full-batch updates
};

struct AcquisitionReport {
    std::vector<double> shifting;  // estimated post-augmentation shifting per class
    std::vector<double> bonus;     // exploration bonus per class
    std::vector<double> score;     // -shifting + bonus
    int chosen_class = 0;          // argmax score, ties to the lowest class id
    double alpha = 0.0;
    std::size_t delta_n = 0;
    std::vector<std::size_t> counts_prev;  // n_C before augmentation
    std::size_t n_prev = 0;                // n before augmentation
};

// Mean per-class gradients over the FULL current dataset at the current
// parameters (acquisition always sees the complete store, never a minibatch).
// Every class must be non-empty.
GradientSnapshot snapshot_gradients(const calib::CalibratorPair& pair,
                                    const data::ClassDataset& ds, const calib::LabelSet& labels);

// || dn/(n+dn) * g_C + n/(n+dn) * g_dataset - g_balanced ||^2
double shifting_estimate(const GradientSnapshot& snap, int class_id, std::size_t delta_n);

// score(C) = -shifting(C) + alpha / sqrt((n + dn) * n_C); argmax wins,
// ties break to the lowest class id.
AcquisitionReport select_class(const GradientSnapshot& snap, double alpha, std::size_t delta_n);

// The exploration constant the convergence analysis would pick:
// 4 d G^2 sqrt(2 log(2 T^4 d)). Experiments use much smaller values.
double theoretical_alpha(std::size_t dim, double grad_bound, std::size_t horizon);

}  // namespace adamab::bandit
