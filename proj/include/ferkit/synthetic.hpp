#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ferkit/dataio.hpp"
#include "ferkit/quality_sim.hpp"

namespace ferkit {

// Seeded desk-scale dataset: one random prototype image per class, items
// are noisy copies, tags come from symmetric-noise synthetic taggers.
struct SyntheticSpec {
    std::size_t classes = 8;
    std::size_t items = 2000;
    std::size_t image_size = 16;
    std::size_t taggers = 10;
    double tagger_noise = 0.20;
    double pixel_noise = 0.25; // stddev, [0,1] pixel units
    long outlier_threshold = 1;
    std::uint64_t seed = 0;
};

// Labels are balanced (round-robin); splits are 70/10/20 by item index
// (i%10: 0-6 train, 7 validation, 8-9 test). Pixels are quantized to
// [0,255] so an in-memory dataset matches its CSV round trip.
std::vector<DatasetItem> make_synthetic_dataset(const SyntheticSpec& spec);

// Same generator, written in the load_dataset CSV schema.
void write_synthetic_csv(const SyntheticSpec& spec, const EmotionSet& set,
                         const std::string& path);

// The raw per-item tag lists of the same generator (for quality-curve work).
std::vector<TagList> synthetic_tag_lists(const SyntheticSpec& spec);

} // namespace ferkit
