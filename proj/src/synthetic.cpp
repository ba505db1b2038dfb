#include "ferkit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ferkit {

namespace {

struct RawItem {
    Split split;
    std::vector<int> pixels; // 0..255
    TagList tags;
    int true_label;
};

std::vector<RawItem> generate(const SyntheticSpec& spec) {
    if (spec.classes < 2 || spec.items < 1 || spec.image_size < 1 || spec.taggers < 1)
        throw std::invalid_argument("bad synthetic spec");

    const std::size_t npix = spec.image_size * spec.image_size;

    // class prototypes
    Rng proto_rng = Rng::derive(spec.seed, 1);
    std::vector<std::vector<double>> protos(spec.classes, std::vector<double>(npix));
    for (auto& p : protos)
        for (double& v : p) v = proto_rng.uniform();

    TaggerNoiseModel noise = TaggerNoiseModel::symmetric(spec.classes, spec.tagger_noise);

    std::vector<int> labels(spec.items);
    for (std::size_t i = 0; i < spec.items; ++i)
        labels[i] = static_cast<int>(i % spec.classes);

    Rng tag_rng = Rng::derive(spec.seed, 2);
    std::vector<TagList> tags = synth_votes(labels, noise, spec.taggers, tag_rng);

    std::vector<RawItem> out(spec.items);
    for (std::size_t i = 0; i < spec.items; ++i) {
        RawItem& it = out[i];
        it.true_label = labels[i];
        it.tags = tags[i];
        const std::size_t mod = i % 10;
        it.split = mod < 7 ? Split::Train : (mod == 7 ? Split::Validation : Split::Test);
        Rng pix_rng = Rng::derive(spec.seed, 1000 + i);
        it.pixels.resize(npix);
        const auto& proto = protos[static_cast<std::size_t>(labels[i])];
        for (std::size_t p = 0; p < npix; ++p) {
            double v = proto[p] + spec.pixel_noise * pix_rng.normal();
            v = std::min(std::max(v, 0.0), 1.0);
            it.pixels[p] = static_cast<int>(std::lround(v * 255.0));
        }
    }
    return out;
}

} // namespace

std::vector<DatasetItem> make_synthetic_dataset(const SyntheticSpec& spec) {
    std::vector<RawItem> raw = generate(spec);
    std::vector<DatasetItem> items;
    items.reserve(raw.size());
    for (const RawItem& r : raw) {
        VoteCounts counts;
        counts.counts.assign(spec.classes, 0);
        for (int t : r.tags) ++counts.counts[static_cast<std::size_t>(t)];
        counts.total = static_cast<long>(r.tags.size());
        VoteCounts cleaned = reject_outliers(counts, spec.outlier_threshold);
        if (!cleaned.usable()) continue;
        DatasetItem item;
        item.split = r.split;
        item.votes = cleaned;
        item.dist = normalize(cleaned);
        item.image = Tensor::zeros({1, spec.image_size, spec.image_size});
        for (std::size_t p = 0; p < r.pixels.size(); ++p)
            item.image.v[p] = static_cast<double>(r.pixels[p]) / 255.0;
        items.push_back(std::move(item));
    }
    return items;
}

void write_synthetic_csv(const SyntheticSpec& spec, const EmotionSet& set,
                         const std::string& path) {
    if (set.size() != spec.classes)
        throw std::invalid_argument("emotion set size must match synthetic class count");
    std::vector<RawItem> raw = generate(spec);
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "usage,pixels";
    for (std::size_t k = 0; k < set.size(); ++k) os << "," << set.name(k);
    os << "\n";
    for (const RawItem& r : raw) {
        switch (r.split) {
            case Split::Train: os << "Training"; break;
            case Split::Validation: os << "PublicTest"; break;
            case Split::Test: os << "PrivateTest"; break;
        }
        os << ",";
        for (std::size_t p = 0; p < r.pixels.size(); ++p)
            os << (p ? " " : "") << r.pixels[p];
        std::vector<long> counts(spec.classes, 0);
        for (int t : r.tags) ++counts[static_cast<std::size_t>(t)];
        for (long c : counts) os << "," << c;
        os << "\n";
    }
}

std::vector<TagList> synthetic_tag_lists(const SyntheticSpec& spec) {
    std::vector<RawItem> raw = generate(spec);
    std::vector<TagList> out;
    out.reserve(raw.size());
    for (auto& r : raw) out.push_back(std::move(r.tags));
    return out;
}

} // namespace ferkit
