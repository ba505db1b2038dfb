#include "ferkit/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ferkit {

namespace {
constexpr double kLogClamp = 1e-12;

double clamped_log(double q) { return std::log(std::max(q, kLogClamp)); }
} // namespace

Scheme parse_scheme(const std::string& name, double ml_theta) {
    Scheme s;
    s.ml_theta = ml_theta;
    if (name == "mv") s.id = SchemeId::MV;
    else if (name == "ml") s.id = SchemeId::ML;
    else if (name == "pld") s.id = SchemeId::PLD;
    else if (name == "cel") s.id = SchemeId::CEL;
    else throw std::invalid_argument("unknown scheme: " + name + " (expected mv|ml|pld|cel)");
    if (s.ml_theta <= 0.0 || s.ml_theta >= 1.0)
        throw std::invalid_argument("ml threshold must be in (0,1)");
    return s;
}

std::string scheme_name(SchemeId id) {
    switch (id) {
        case SchemeId::MV: return "mv";
        case SchemeId::ML: return "ml";
        case SchemeId::PLD: return "pld";
        case SchemeId::CEL: return "cel";
    }
    return "?";
}

PredictedDistribution softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw std::invalid_argument("empty logits");
    PredictedDistribution out;
    out.logits = logits;
    out.q.resize(logits.size());
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out.q[k] = std::exp(logits[k] - mx);
        sum += out.q[k];
    }
    for (double& v : out.q) v /= sum;
    return out;
}

TrainingTarget target_mv(const LabelDistribution& dist) {
    TrainingTarget t;
    t.kind = TrainingTarget::Kind::OneHot;
    t.index = majority_class(dist);
    return t;
}

TrainingTarget admitted_set(const LabelDistribution& dist, double theta) {
    if (theta <= 0.0 || theta >= 1.0)
        throw std::invalid_argument("theta must be in (0,1)");
    TrainingTarget t;
    t.kind = TrainingTarget::Kind::AdmittedSet;
    t.admitted.assign(dist.size(), false);
    bool any = false;
    for (std::size_t k = 0; k < dist.size(); ++k) {
        if (dist.p[k] > theta) {
            t.admitted[k] = true;
            any = true;
        }
    }
    if (!any) t.admitted[majority_class(dist)] = true;
    return t;
}

double loss_ce(const TrainingTarget& target, const PredictedDistribution& pred) {
    switch (target.kind) {
        case TrainingTarget::Kind::OneHot:
            return -clamped_log(pred.q.at(target.index));
        case TrainingTarget::Kind::Distribution: {
            if (target.dist.size() != pred.q.size())
                throw std::invalid_argument("target/prediction size mismatch");
            double loss = 0.0;
            for (std::size_t k = 0; k < pred.q.size(); ++k)
                if (target.dist.p[k] != 0.0)
                    loss -= target.dist.p[k] * clamped_log(pred.q[k]);
            return loss;
        }
        case TrainingTarget::Kind::AdmittedSet:
            throw std::invalid_argument("loss_ce does not accept admitted-set targets; use loss_ml");
    }
    throw std::logic_error("unreachable");
}

MlLoss loss_ml(const LabelDistribution& dist, const PredictedDistribution& pred, double theta) {
    TrainingTarget adm = admitted_set(dist, theta);
    MlLoss out;
    bool found = false;
    for (std::size_t k = 0; k < pred.q.size(); ++k) {
        if (!adm.admitted[k]) continue;
        if (!found || pred.q[k] > pred.q[out.chosen]) {
            out.chosen = k;
            found = true;
        }
    }
    out.loss = -clamped_log(pred.q[out.chosen]);
    return out;
}

TrainingTarget draw_pld(const LabelDistribution& dist, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    TrainingTarget t;
    t.kind = TrainingTarget::Kind::OneHot;
    t.index = dist.size() - 1; // guards against round-off at u ~ 1
    for (std::size_t k = 0; k < dist.size(); ++k) {
        acc += dist.p[k];
        if (u < acc) {
            t.index = k;
            break;
        }
    }
    return t;
}

std::vector<double> effective_target(const Scheme& scheme,
                                     const LabelDistribution& dist,
                                     const PredictedDistribution& pred,
                                     const std::optional<TrainingTarget>& drawn) {
    const std::size_t K = pred.q.size();
    std::vector<double> t(K, 0.0);
    switch (scheme.id) {
        case SchemeId::MV:
            t[majority_class(dist)] = 1.0;
            break;
        case SchemeId::ML:
            if (drawn && drawn->kind == TrainingTarget::Kind::OneHot)
                t[drawn->index] = 1.0;
            else
                t[loss_ml(dist, pred, scheme.ml_theta).chosen] = 1.0;
            break;
        case SchemeId::PLD:
            if (!drawn || drawn->kind != TrainingTarget::Kind::OneHot)
                throw std::invalid_argument("PLD requires a drawn one-hot target");
            t[drawn->index] = 1.0;
            break;
        case SchemeId::CEL:
            if (dist.size() != K)
                throw std::invalid_argument("distribution/prediction size mismatch");
            t = dist.p;
            break;
    }
    return t;
}

double scheme_loss(const Scheme& scheme,
                   const LabelDistribution& dist,
                   const PredictedDistribution& pred,
                   const std::optional<TrainingTarget>& drawn) {
    std::vector<double> t = effective_target(scheme, dist, pred, drawn);
    double loss = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] != 0.0) loss -= t[k] * clamped_log(pred.q[k]);
    return loss;
}

std::vector<double> grad_logits(const Scheme& scheme,
                                const LabelDistribution& dist,
                                const PredictedDistribution& pred,
                                const std::optional<TrainingTarget>& drawn) {
    std::vector<double> g = effective_target(scheme, dist, pred, drawn);
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = pred.q[k] - g[k];
    return g;
}

} // namespace ferkit
