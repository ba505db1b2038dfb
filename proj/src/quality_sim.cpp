#include "ferkit/quality_sim.hpp"

#include <cmath>
#include <stdexcept>

namespace ferkit {

TaggerNoiseModel TaggerNoiseModel::identity(std::size_t k) {
    TaggerNoiseModel m;
    m.confusion.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) m.confusion[i][i] = 1.0;
    return m;
}

TaggerNoiseModel TaggerNoiseModel::symmetric(std::size_t k, double noise) {
    if (noise < 0.0 || noise > 1.0)
        throw std::invalid_argument("noise must be in [0,1]");
    if (k < 2) throw std::invalid_argument("need K >= 2");
    TaggerNoiseModel m;
    m.confusion.assign(k, std::vector<double>(k, noise / static_cast<double>(k - 1)));
    for (std::size_t i = 0; i < k; ++i) m.confusion[i][i] = 1.0 - noise;
    return m;
}

void TaggerNoiseModel::validate() const {
    for (const auto& row : confusion) {
        if (row.size() != confusion.size())
            throw std::invalid_argument("confusion matrix must be square");
        double sum = 0.0;
        for (double v : row) {
            if (v < 0.0) throw std::invalid_argument("confusion entries must be >= 0");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("confusion rows must sum to 1");
    }
}

namespace {

std::size_t majority_of_tags(const TagList& tags, std::size_t k,
                             std::vector<long>& scratch) {
    scratch.assign(k, 0);
    for (int t : tags) ++scratch[static_cast<std::size_t>(t)];
    std::size_t best = 0;
    for (std::size_t i = 1; i < k; ++i)
        if (scratch[i] > scratch[best]) best = i;
    return best;
}

} // namespace

double subsample_agreement(const std::vector<TagList>& items, std::size_t k,
                           std::size_t m, std::size_t n_resamples,
                           std::uint64_t seed) {
    if (items.empty()) throw std::invalid_argument("no items");
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (n_resamples < 1) throw std::invalid_argument("n_resamples must be >= 1");

    std::vector<long> scratch;
    double agree = 0.0;
    std::size_t pairs = 0;
    for (std::size_t item = 0; item < items.size(); ++item) {
        const TagList& tags = items[item];
        if (m > tags.size())
            throw std::invalid_argument("m exceeds tagger count for item " +
                                        std::to_string(item));
        for (int t : tags)
            if (t < 0 || static_cast<std::size_t>(t) >= k)
                throw std::invalid_argument("tag index out of range");

        const std::size_t truth = majority_of_tags(tags, k, scratch);
        Rng rng = Rng::derive(seed, (item << 8) ^ m);
        std::vector<int> pool(tags);
        TagList sub(m);
        for (std::size_t r = 0; r < n_resamples; ++r) {
            // partial Fisher-Yates: first m entries are the sample
            for (std::size_t i = 0; i < m; ++i) {
                std::size_t j = i + static_cast<std::size_t>(
                                        rng.uniform_int(pool.size() - i));
                std::swap(pool[i], pool[j]);
                sub[i] = pool[i];
            }
            if (majority_of_tags(sub, k, scratch) == truth) agree += 1.0;
            ++pairs;
        }
    }
    return agree / static_cast<double>(pairs);
}

QualityCurve quality_curve(const std::vector<TagList>& items, std::size_t k,
                           std::size_t n_resamples, std::uint64_t seed) {
    if (items.empty()) throw std::invalid_argument("no items");
    const std::size_t T = items[0].size();
    for (const auto& tags : items)
        if (tags.size() != T)
            throw std::invalid_argument("all items must carry the same tagger count");
    QualityCurve curve;
    curve.n_items = items.size();
    curve.n_resamples = n_resamples;
    for (std::size_t m = 1; m <= T; ++m)
        curve.points.push_back({m, subsample_agreement(items, k, m, n_resamples, seed)});
    return curve;
}

std::vector<TagList> synth_votes(const std::vector<int>& true_labels,
                                 const TaggerNoiseModel& noise,
                                 std::size_t taggers, Rng& rng) {
    noise.validate();
    if (taggers < 1) throw std::invalid_argument("need >= 1 tagger");
    const std::size_t k = noise.size();
    std::vector<TagList> out;
    out.reserve(true_labels.size());
    for (int label : true_labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw std::invalid_argument("true label out of range");
        const auto& row = noise.confusion[static_cast<std::size_t>(label)];
        TagList tags(taggers);
        for (std::size_t t = 0; t < taggers; ++t) {
            double u = rng.uniform();
            double acc = 0.0;
            std::size_t drawn = k - 1;
            for (std::size_t j = 0; j < k; ++j) {
                acc += row[j];
                if (u < acc) {
                    drawn = j;
                    break;
                }
            }
            tags[t] = static_cast<int>(drawn);
        }
        out.push_back(std::move(tags));
    }
    return out;
}

} // namespace ferkit
