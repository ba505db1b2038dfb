#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ferkit {

// Fixed, ordered set of emotion categories. Indices are stable for the
// lifetime of a run.
class EmotionSet {
public:
    explicit EmotionSet(std::vector<std::string> names);

    static EmotionSet fer_default(); // the canonical 8 emotion categories

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t k) const { return names_.at(k); }
    const std::vector<std::string>& names() const { return names_; }
    // -1 if absent
    int index_of(const std::string& name) const;

private:
    std::vector<std::string> names_;
};

// Raw tally of tagger votes over K categories.
struct VoteCounts {
    std::vector<long> counts;
    long total = 0;

    bool usable() const { return total > 0; }
};

// Normalized probability vector over K categories.
struct LabelDistribution {
    std::vector<double> p;

    std::size_t size() const { return p.size(); }
    bool is_one_hot(double tol = 1e-12) const;
};

// Count category occurrences. Throws std::invalid_argument on an empty
// list or an out-of-range index (malformed annotation).
VoteCounts tally_votes(const std::vector<int>& annotations, const EmotionSet& set);

// Zero out every count <= threshold and recompute the total. A result
// with total == 0 signals an unusable item; callers decide drop vs keep.
VoteCounts reject_outliers(const VoteCounts& counts, long threshold);

// counts / total. Throws std::invalid_argument when total == 0.
LabelDistribution normalize(const VoteCounts& counts);

// argmax_k p_k, ties broken by lowest index.
std::size_t majority_class(const LabelDistribution& dist);

// Same tie rule, on raw counts.
std::size_t majority_class(const VoteCounts& counts);

} // namespace ferkit
