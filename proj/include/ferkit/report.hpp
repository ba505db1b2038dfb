#pragma once

#include <cstddef>
#include <vector>

namespace ferkit {

// Accuracy against the majority label plus the K x K confusion matrix
// (rows = true majority, columns = prediction) and multi-trial stats.
struct EvalReport {
    double accuracy = 0.0;
    std::vector<std::vector<long>> confusion;
    std::vector<double> per_trial;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation over trials
    bool single_trial = false;

    long total() const {
        long n = 0;
        for (const auto& row : confusion)
            for (long v : row) n += v;
        return n;
    }
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrialResult {
    std::vector<EpochStats> epochs;
    double test_accuracy = 0.0;
    std::vector<std::vector<long>> confusion;
    // Diagnostic only: prediction counted correct if it lands in the
    // ML-admitted set of the item.
    double any_admitted_accuracy = 0.0;
};

struct RunResult {
    std::vector<TrialResult> trials;
    EvalReport report; // aggregated; confusion from the best trial
};

// mean and population stddev; stddev is 0 for a single value.
void mean_stddev(const std::vector<double>& xs, double& mean, double& stddev);

} // namespace ferkit
