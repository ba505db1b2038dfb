#include "ferkit/dataio.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ferkit {

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

namespace {

Split parse_usage(const std::string& tok, std::size_t line) {
    if (tok == "Training") return Split::Train;
    if (tok == "PublicTest") return Split::Validation;
    if (tok == "PrivateTest") return Split::Test;
    throw std::runtime_error("line " + std::to_string(line) +
                             ": unknown split token '" + tok + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

} // namespace

Tensor resize_bilinear(const Tensor& image, std::size_t n) {
    const std::size_t H = image.shape[1], W = image.shape[2];
    if (H == n && W == n) return image;
    Tensor out = Tensor::zeros({1, n, n});
    for (std::size_t y = 0; y < n; ++y) {
        double sy = (static_cast<double>(y) + 0.5) * static_cast<double>(H) /
                        static_cast<double>(n) - 0.5;
        sy = std::min(std::max(sy, 0.0), static_cast<double>(H - 1));
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, H - 1);
        const double wy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < n; ++x) {
            double sx = (static_cast<double>(x) + 0.5) * static_cast<double>(W) /
                            static_cast<double>(n) - 0.5;
            sx = std::min(std::max(sx, 0.0), static_cast<double>(W - 1));
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, W - 1);
            const double wx = sx - static_cast<double>(x0);
            out.at(0, y, x) = (1.0 - wy) * ((1.0 - wx) * image.at(0, y0, x0) +
                                            wx * image.at(0, y0, x1)) +
                              wy * ((1.0 - wx) * image.at(0, y1, x0) +
                                    wx * image.at(0, y1, x1));
        }
    }
    return out;
}

std::vector<DatasetItem> load_dataset(const std::string& path,
                                      const EmotionSet& set,
                                      const LoadOptions& opts,
                                      LoadStats* stats) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty dataset file: " + path);
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "usage" || header[1] != "pixels")
        throw std::runtime_error("header must start with usage,pixels");

    // map vote columns onto the emotion set; unknown columns are dropped
    std::vector<int> col_emotion(header.size(), -1);
    std::size_t dropped_cols = 0;
    std::vector<bool> seen(set.size(), false);
    for (std::size_t c = 2; c < header.size(); ++c) {
        int idx = set.index_of(header[c]);
        col_emotion[c] = idx;
        if (idx < 0) ++dropped_cols;
        else seen[static_cast<std::size_t>(idx)] = true;
    }
    for (std::size_t k = 0; k < set.size(); ++k)
        if (!seen[k])
            throw std::runtime_error("dataset is missing a vote column for '" +
                                     set.name(k) + "'");

    const std::size_t npix = opts.source_size * opts.source_size;
    std::vector<DatasetItem> items;
    LoadStats st;
    st.dropped_vote_columns = dropped_cols;

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error("line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(header.size()) + " fields, got " +
                                     std::to_string(fields.size()));

        DatasetItem item;
        item.split = parse_usage(fields[0], lineno);

        Tensor img = Tensor::zeros({1, opts.source_size, opts.source_size});
        {
            std::stringstream ps(fields[1]);
            std::size_t i = 0;
            long v;
            while (ps >> v) {
                if (v < 0 || v > 255)
                    throw std::runtime_error("line " + std::to_string(lineno) +
                                             ": pixel value out of [0,255]");
                if (i < npix) img.v[i] = static_cast<double>(v) / 255.0;
                ++i;
            }
            if (i != npix)
                throw std::runtime_error("line " + std::to_string(lineno) + ": expected " +
                                         std::to_string(npix) + " pixels for declared " +
                                         std::to_string(opts.source_size) + "x" +
                                         std::to_string(opts.source_size));
        }
        item.image = resize_bilinear(img, opts.target_size);

        VoteCounts raw;
        raw.counts.assign(set.size(), 0);
        for (std::size_t c = 2; c < fields.size(); ++c) {
            long v;
            try {
                v = std::stol(fields[c]);
            } catch (const std::exception&) {
                throw std::runtime_error("line " + std::to_string(lineno) +
                                         ": malformed vote count '" + fields[c] + "'");
            }
            if (v < 0)
                throw std::runtime_error("line " + std::to_string(lineno) +
                                         ": negative vote count");
            if (col_emotion[c] >= 0) {
                raw.counts[static_cast<std::size_t>(col_emotion[c])] += v;
                raw.total += v;
            }
        }
        if (raw.total == 0)
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": item has no votes in the emotion set");

        VoteCounts cleaned = reject_outliers(raw, opts.outlier_threshold);
        if (!cleaned.usable()) {
            if (opts.keep_rejected_raw) {
                cleaned = raw;
            } else {
                ++st.dropped_unusable;
                continue;
            }
        }
        item.votes = cleaned;
        item.dist = normalize(cleaned);
        items.push_back(std::move(item));
    }
    st.loaded = items.size();
    if (stats) *stats = st;
    return items;
}

std::vector<const DatasetItem*> filter_split(const std::vector<DatasetItem>& items, Split s) {
    std::vector<const DatasetItem*> out;
    for (const auto& it : items)
        if (it.split == s) out.push_back(&it);
    return out;
}

namespace {

constexpr char kMagic[4] = {'F', 'K', 'P', 'T'};
constexpr std::uint8_t kVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

void save_checkpoint(const Model& model, const nlohmann::json& metadata,
                     const std::string& path) {
    nlohmann::json header;
    header["layers"] = model.spec_json();
    header["meta"] = metadata;
    const std::string htext = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
        os.write(kMagic, 4);
        os.put(static_cast<char>(kVersion));
        write_u64(os, htext.size());
        os.write(htext.data(), static_cast<std::streamsize>(htext.size()));
        for (Tensor* p : const_cast<Model&>(model).parameters()) {
            write_u64(os, p->shape.size());
            for (std::size_t d : p->shape) write_u64(os, d);
            static_assert(sizeof(double) == 8);
            os.write(reinterpret_cast<const char*>(p->v.data()),
                     static_cast<std::streamsize>(p->v.size() * 8));
        }
        if (!os) throw std::runtime_error("write failure on checkpoint: " + path);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path, std::size_t expected_k) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    const int version = is.get();
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " +
                                 std::to_string(version));

    const std::uint64_t hlen = read_u64(is);
    std::string htext(hlen, '\0');
    is.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw std::runtime_error("checkpoint truncated in header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(htext);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("corrupt checkpoint header: ") + e.what());
    }

    Checkpoint ck;
    ck.model = Model::from_spec(header.at("layers"));
    ck.metadata = header.value("meta", nlohmann::json::object());

    for (Tensor* p : ck.model.parameters()) {
        const std::uint64_t ndim = read_u64(is);
        std::vector<std::size_t> shape(ndim);
        for (std::uint64_t d = 0; d < ndim; ++d)
            shape[d] = static_cast<std::size_t>(read_u64(is));
        if (shape != p->shape) {
            std::string stored;
            for (std::size_t d : shape)
                stored += (stored.empty() ? "" : "x") + std::to_string(d);
            throw std::runtime_error("checkpoint shape disagreement: stored tensor " +
                                     stored + " vs model " + p->shape_str());
        }
        is.read(reinterpret_cast<char*>(p->v.data()),
                static_cast<std::streamsize>(p->v.size() * 8));
        if (!is) throw std::runtime_error("checkpoint truncated in parameter data");
    }
    if (expected_k != 0 && ck.model.output_size() != expected_k)
        throw std::runtime_error("checkpoint shape disagreement: model outputs " +
                                 std::to_string(ck.model.output_size()) +
                                 " classes, run expects " + std::to_string(expected_k));
    return ck;
}

void write_metrics(const RunResult& run, const nlohmann::json& config_echo,
                   const EmotionSet& set, const std::string& prefix) {
    using ojson = nlohmann::ordered_json;

    ojson doc;
    doc["config"] = config_echo;
    doc["trials"] = ojson::array();
    for (const auto& trial : run.trials) {
        ojson t;
        t["epochs"] = ojson::array();
        for (const auto& e : trial.epochs) {
            t["epochs"].push_back({{"train_loss", e.train_loss},
                                   {"val_loss", e.val_loss},
                                   {"val_accuracy", e.val_accuracy}});
        }
        t["test_accuracy"] = trial.test_accuracy;
        t["any_admitted_accuracy"] = trial.any_admitted_accuracy;
        doc["trials"].push_back(std::move(t));
    }
    const EvalReport& rep = run.report;
    doc["report"]["accuracy"] = rep.accuracy;
    doc["report"]["per_trial"] = rep.per_trial;
    doc["report"]["mean"] = rep.mean;
    doc["report"]["stddev"] = rep.stddev;
    doc["report"]["single_trial"] = rep.single_trial;
    {
        ojson counts = ojson::array();
        for (const auto& row : rep.confusion) {
            long n = 0;
            for (long v : row) n += v;
            counts.push_back(n);
        }
        doc["report"]["per_class_counts"] = std::move(counts);
    }

    {
        std::ofstream os(prefix + "metrics.json", std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write metrics json");
        os << doc.dump(2) << "\n";
    }
    {
        std::ofstream os(prefix + "confusion.csv", std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write confusion csv");
        os << "true\\pred";
        for (std::size_t k = 0; k < set.size(); ++k) os << "," << set.name(k);
        os << "\n";
        for (std::size_t r = 0; r < rep.confusion.size(); ++r) {
            os << set.name(r);
            for (long v : rep.confusion[r]) os << "," << v;
            os << "\n";
        }
    }
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot hash file: " + path);
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[65536];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        const std::streamsize n = is.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
        if (!is) break;
    }
    return h;
}

} // namespace ferkit
