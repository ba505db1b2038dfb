#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ferkit/label_core.hpp"
#include "ferkit/rng.hpp"

namespace ferkit {

enum class SchemeId { MV, ML, PLD, CEL };

// Training scheme selector. ML carries its admission threshold theta.
struct Scheme {
    SchemeId id = SchemeId::MV;
    double ml_theta = 0.30;
};

Scheme parse_scheme(const std::string& name, double ml_theta = 0.30);
std::string scheme_name(SchemeId id);

// Per-example training target: a one-hot class, an admitted set, or a
// full distribution.
struct TrainingTarget {
    enum class Kind { OneHot, AdmittedSet, Distribution };
    Kind kind = Kind::OneHot;
    std::size_t index = 0;           // OneHot
    std::vector<bool> admitted;      // AdmittedSet
    LabelDistribution dist;          // Distribution
};

// Softmax output q plus the pre-softmax logits it came from.
struct PredictedDistribution {
    std::vector<double> logits;
    std::vector<double> q;
};

// Numerically stable softmax.
PredictedDistribution softmax(const std::vector<double>& logits);

// One-hot at the majority class of the distribution.
TrainingTarget target_mv(const LabelDistribution& dist);

// Entry k admitted iff p_k > theta; empty set falls back to the majority
// class so every example keeps a finite loss.
TrainingTarget admitted_set(const LabelDistribution& dist, double theta);

// Cross-entropy of a one-hot or distribution target against q.
// q is clamped at 1e-12 before the log, so the result is always finite.
double loss_ce(const TrainingTarget& target, const PredictedDistribution& pred);

struct MlLoss {
    double loss = 0.0;
    std::size_t chosen = 0;
};

// Among admitted categories, train on the one the network currently
// prefers: chosen = argmax over admitted k of q_k (ties to lowest index),
// loss = -log q_chosen.
MlLoss loss_ml(const LabelDistribution& dist, const PredictedDistribution& pred, double theta);

// Sample a one-hot target: class k with probability p_k.
TrainingTarget draw_pld(const LabelDistribution& dist, Rng& rng);

// dL/dlogits = q - t for the scheme's effective target t.
// PLD requires the drawn target; ML recomputes its chosen class from q
// unless a frozen one-hot target is supplied.
std::vector<double> grad_logits(const Scheme& scheme,
                                const LabelDistribution& dist,
                                const PredictedDistribution& pred,
                                const std::optional<TrainingTarget>& drawn = std::nullopt);

// The scheme's effective target as a dense probability vector (used by
// both grad_logits and the gradient checker, which freezes it).
std::vector<double> effective_target(const Scheme& scheme,
                                     const LabelDistribution& dist,
                                     const PredictedDistribution& pred,
                                     const std::optional<TrainingTarget>& drawn = std::nullopt);

// Per-example loss for a scheme given its (possibly frozen) target.
double scheme_loss(const Scheme& scheme,
                   const LabelDistribution& dist,
                   const PredictedDistribution& pred,
                   const std::optional<TrainingTarget>& drawn = std::nullopt);

} // namespace ferkit
