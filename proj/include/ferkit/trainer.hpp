#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ferkit/augment.hpp"
#include "ferkit/dataio.hpp"
#include "ferkit/report.hpp"
#include "ferkit/schemes.hpp"
#include "ferkit/tensornet.hpp"

namespace ferkit {

struct TrainConfig {
    Scheme scheme;
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double learning_rate = 0.01;
    double momentum = 0.9;
    bool lr_step_decay = true; // x0.1 at 2/3 of the epochs
    std::uint64_t seed = 0;
    std::size_t trials = 5;
    long outlier_threshold = 1;
    bool pld_redraw_per_visit = false; // default: one draw per example per epoch
    bool augment_enabled = false;
    AffineParams augment;
    std::size_t workers = 1;
};

// Momentum buffers, one per parameter tensor; owned across epochs.
struct SgdState {
    std::vector<Tensor> velocity;
};

// One pass over the training items: seeded shuffle, per-scheme targets
// (PLD draws once per example at epoch start), SGD-with-momentum updates
// with mean-over-batch gradient scaling. Returns the mean per-example
// loss. Per-example rng streams are derived from (seed, epoch, position),
// so the result is independent of the worker count up to float summation
// order.
double train_epoch(Model& model,
                   const std::vector<const DatasetItem*>& items,
                   const TrainConfig& cfg,
                   double learning_rate,
                   std::size_t epoch_index,
                   SgdState& state);

// Deterministic, augmentation-free: prediction = argmax q, truth = the
// item's majority class. Throws on an empty dataset.
EvalReport evaluate(Model& model, const std::vector<const DatasetItem*>& items);

// Diagnostic: counts a prediction correct when it falls in the item's
// ML-admitted set.
double any_admitted_accuracy(Model& model,
                             const std::vector<const DatasetItem*>& items,
                             double theta);

// Mean cross-entropy of the model against the full label distributions.
double dataset_cel_loss(Model& model, const std::vector<const DatasetItem*>& items);

// Table-style protocol: cfg.trials independent trainings from scratch,
// trial seeds = cfg.seed + trial index. The aggregate report carries
// per-trial accuracies, mean +/- population stddev, and the confusion matrix
// of the best trial. best_model is that trial's final model.
struct TrialRun {
    RunResult result;
    Model best_model;
};

TrialRun run_trials(const std::vector<DatasetItem>& data,
                    const TrainConfig& cfg,
                    const std::function<Model()>& make_model);

} // namespace ferkit
