#include "ferkit/label_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ferkit {

EmotionSet::EmotionSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2)
        throw std::invalid_argument("EmotionSet needs at least 2 categories");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_)
        if (!seen.insert(n).second)
            throw std::invalid_argument("duplicate category name: " + n);
}

EmotionSet EmotionSet::fer_default() {
    return EmotionSet({"neutral", "happiness", "surprise", "sadness",
                       "anger", "disgust", "fear", "contempt"});
}

int EmotionSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    return -1;
}

bool LabelDistribution::is_one_hot(double tol) const {
    for (double v : p)
        if (std::fabs(v) > tol && std::fabs(v - 1.0) > tol) return false;
    return true;
}

VoteCounts tally_votes(const std::vector<int>& annotations, const EmotionSet& set) {
    if (annotations.empty())
        throw std::invalid_argument("empty annotation list");
    VoteCounts vc;
    vc.counts.assign(set.size(), 0);
    for (int a : annotations) {
        if (a < 0 || static_cast<std::size_t>(a) >= set.size())
            throw std::invalid_argument("annotation index out of range: " + std::to_string(a));
        ++vc.counts[static_cast<std::size_t>(a)];
    }
    vc.total = static_cast<long>(annotations.size());
    return vc;
}

VoteCounts reject_outliers(const VoteCounts& counts, long threshold) {
    if (threshold < 0)
        throw std::invalid_argument("outlier threshold must be >= 0");
    VoteCounts out;
    out.counts.reserve(counts.counts.size());
    out.total = 0;
    for (long c : counts.counts) {
        long kept = (c <= threshold) ? 0 : c;
        out.counts.push_back(kept);
        out.total += kept;
    }
    return out;
}

LabelDistribution normalize(const VoteCounts& counts) {
    if (counts.total <= 0)
        throw std::invalid_argument("cannot normalize zero-total vote counts");
    LabelDistribution d;
    d.p.reserve(counts.counts.size());
    for (long c : counts.counts)
        d.p.push_back(static_cast<double>(c) / static_cast<double>(counts.total));
    return d;
}

std::size_t majority_class(const LabelDistribution& dist) {
    if (dist.p.empty())
        throw std::invalid_argument("empty distribution");
    std::size_t best = 0;
    for (std::size_t k = 1; k < dist.p.size(); ++k)
        if (dist.p[k] > dist.p[best]) best = k; // strict: ties keep lowest index
    return best;
}

std::size_t majority_class(const VoteCounts& counts) {
    if (counts.counts.empty())
        throw std::invalid_argument("empty vote counts");
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.counts.size(); ++k)
        if (counts.counts[k] > counts.counts[best]) best = k;
    return best;
}

} // namespace ferkit
