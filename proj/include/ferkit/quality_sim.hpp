#pragma once

#include <cstddef>
#include <vector>

#include "ferkit/label_core.hpp"
#include "ferkit/rng.hpp"

namespace ferkit {

// Per-tagger detail for one item: the T individual category indices.
using TagList = std::vector<int>;

// Row-stochastic K x K matrix: probability a tagger reports column j
// given true category i. Generator for synthetic vote data.
struct TaggerNoiseModel {
    std::vector<std::vector<double>> confusion;

    static TaggerNoiseModel identity(std::size_t k);
    // 1 - noise on the diagonal, noise spread evenly off-diagonal
    static TaggerNoiseModel symmetric(std::size_t k, double noise);

    std::size_t size() const { return confusion.size(); }
    void validate() const; // throws if rows do not sum to 1
};

struct QualityPoint {
    std::size_t taggers = 0;
    double agreement = 0.0;
};

struct QualityCurve {
    std::vector<QualityPoint> points;
    std::size_t n_items = 0;
    std::size_t n_resamples = 0;
};

// Fraction of (item, resample) pairs whose majority over m tags drawn
// without replacement matches the item's full-panel majority. Ties break
// to the lowest category index throughout. Per-item streams are derived
// from (rng seed, item index, m) so items are order-independent.
double subsample_agreement(const std::vector<TagList>& items, std::size_t k,
                           std::size_t m, std::size_t n_resamples,
                           std::uint64_t seed);

// One point per m in [1, T].
QualityCurve quality_curve(const std::vector<TagList>& items, std::size_t k,
                           std::size_t n_resamples, std::uint64_t seed);

// T independent draws per item from the confusion row of its true label.
std::vector<TagList> synth_votes(const std::vector<int>& true_labels,
                                 const TaggerNoiseModel& noise,
                                 std::size_t taggers, Rng& rng);

} // namespace ferkit
