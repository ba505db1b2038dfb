#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include "ferkit/dataio.hpp"
#include "ferkit/synthetic.hpp"

using namespace ferkit;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("ferkit_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string pixel_block(std::size_t n, int value = 128) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += std::to_string(value);
    }
    return s;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

const char* kHeader =
    "usage,pixels,neutral,happiness,surprise,sadness,anger,disgust,fear,contempt";

} // namespace

TEST_CASE("load_dataset parses, rejects outliers and normalizes") {
    TempDir tmp;
    std::string path = tmp.file("data.csv");
    {
        std::ofstream os(path);
        os << kHeader << "\n";
        os << "Training," << pixel_block(4 * 4) << ",7,1,2,0,0,0,0,0\n";
        os << "PublicTest," << pixel_block(4 * 4) << ",10,0,0,0,0,0,0,0\n";
        os << "PrivateTest," << pixel_block(4 * 4) << ",0,0,0,0,0,0,0,10\n";
    }
    LoadOptions opts;
    opts.source_size = 4;
    opts.target_size = 8;
    opts.outlier_threshold = 1;
    LoadStats stats;
    auto items = load_dataset(path, EmotionSet::fer_default(), opts, &stats);
    REQUIRE(items.size() == 3);
    CHECK(stats.loaded == 3);
    CHECK(items[0].split == Split::Train);
    CHECK(items[1].split == Split::Validation);
    CHECK(items[2].split == Split::Test);

    // votes [7,1,2,...] with threshold 1 -> [7/9, 0, 2/9, ...]
    CHECK(items[0].dist.p[0] == doctest::Approx(7.0 / 9.0));
    CHECK(items[0].dist.p[1] == 0.0);
    CHECK(items[0].dist.p[2] == doctest::Approx(2.0 / 9.0));

    // resized to the target input
    CHECK(items[0].image.shape == std::vector<std::size_t>{1, 8, 8});
    CHECK(items[0].image.v[0] == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("malformed rows report the line number") {
    TempDir tmp;
    EmotionSet set = EmotionSet::fer_default();
    LoadOptions opts;
    opts.source_size = 4;
    opts.target_size = 4;

    std::string path = tmp.file("bad_pixels.csv");
    {
        std::ofstream os(path);
        os << kHeader << "\n";
        os << "Training," << pixel_block(4 * 4) << ",10,0,0,0,0,0,0,0\n";
        os << "Training," << pixel_block(10) << ",10,0,0,0,0,0,0,0\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path, set, opts),
                         doctest::Contains("line 3"), std::runtime_error);

    path = tmp.file("bad_split.csv");
    {
        std::ofstream os(path);
        os << kHeader << "\n";
        os << "Nonsense," << pixel_block(4 * 4) << ",10,0,0,0,0,0,0,0\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path, set, opts),
                         doctest::Contains("line 2"), std::runtime_error);

    path = tmp.file("bad_vote.csv");
    {
        std::ofstream os(path);
        os << kHeader << "\n";
        os << "Training," << pixel_block(4 * 4) << ",10,0,0,x,0,0,0,0\n";
    }
    CHECK_THROWS_AS(load_dataset(path, set, opts), std::runtime_error);
}

TEST_CASE("extra vote columns are dropped; unusable items counted") {
    TempDir tmp;
    std::string path = tmp.file("extra.csv");
    {
        std::ofstream os(path);
        os << kHeader << ",unknown,NF\n";
        os << "Training," << pixel_block(4 * 4) << ",8,0,0,0,0,0,0,0,5,5\n";
        // all votes <= 1: dropped after rejection
        os << "Training," << pixel_block(4 * 4) << ",1,1,1,1,1,1,1,1,0,0\n";
    }
    LoadOptions opts;
    opts.source_size = 4;
    opts.target_size = 4;
    LoadStats stats;
    auto items = load_dataset(path, EmotionSet::fer_default(), opts, &stats);
    REQUIRE(items.size() == 1);
    CHECK(stats.dropped_vote_columns == 2);
    CHECK(stats.dropped_unusable == 1);
    CHECK(items[0].votes.total == 8); // unknown/NF votes not counted

    // keep-raw flag retains the pre-rejection counts instead
    opts.keep_rejected_raw = true;
    items = load_dataset(path, EmotionSet::fer_default(), opts, &stats);
    REQUIRE(items.size() == 2);
    CHECK(items[1].votes.total == 8);
    CHECK(items[1].dist.p[0] == doctest::Approx(0.125));
}

TEST_CASE("synthetic CSV round-trips through load_dataset") {
    TempDir tmp;
    SyntheticSpec spec;
    spec.items = 60;
    spec.image_size = 8;
    spec.seed = 5;
    std::string path = tmp.file("synth.csv");
    write_synthetic_csv(spec, EmotionSet::fer_default(), path);

    LoadOptions opts;
    opts.source_size = 8;
    opts.target_size = 8;
    opts.outlier_threshold = spec.outlier_threshold;
    auto loaded = load_dataset(path, EmotionSet::fer_default(), opts);
    auto direct = make_synthetic_dataset(spec);
    REQUIRE(loaded.size() == direct.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].image.v == direct[i].image.v);
        CHECK(loaded[i].votes.counts == direct[i].votes.counts);
        CHECK(loaded[i].split == direct[i].split);
    }
}

TEST_CASE("checkpoint round trip is bit-exact") {
    TempDir tmp;
    Model m = build_toy(8, 8, 1);
    Rng init = Rng::derive(33, 0);
    m.init_params(init);
    std::string path = tmp.file("model.ckpt");
    save_checkpoint(m, {{"seed", 33}, {"epoch", 5}}, path);

    Checkpoint ck = load_checkpoint(path, 8);
    CHECK(ck.metadata.at("seed") == 33);

    auto pa = m.parameters();
    auto pb = ck.model.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->v == pb[i]->v);

    // identical inference on random inputs
    Rng rng(9);
    for (int it = 0; it < 10; ++it) {
        Tensor img = Tensor::zeros({1, 8, 8});
        for (double& v : img.v) v = rng.uniform();
        CHECK(m.forward(img, nullptr, false).q == ck.model.forward(img, nullptr, false).q);
    }
}

TEST_CASE("checkpoint failure modes are distinct") {
    TempDir tmp;
    Model m = build_toy(8, 8, 1);
    Rng init = Rng::derive(1, 0);
    m.init_params(init);
    std::string path = tmp.file("model.ckpt");
    save_checkpoint(m, {}, path);

    // truncation
    std::string bytes = read_file(path);
    std::string trunc_path = tmp.file("trunc.ckpt");
    {
        std::ofstream os(trunc_path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(trunc_path),
                         doctest::Contains("truncated"), std::runtime_error);

    // bad magic
    std::string junk_path = tmp.file("junk.ckpt");
    {
        std::ofstream os(junk_path, std::ios::binary);
        os << "not a checkpoint at all";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(junk_path),
                         doctest::Contains("magic"), std::runtime_error);

    // K mismatch
    CHECK_THROWS_WITH_AS(load_checkpoint(path, 4),
                         doctest::Contains("shape disagreement"), std::runtime_error);
}

TEST_CASE("write_metrics emits consistent, deterministic files") {
    TempDir tmp;
    RunResult run;
    TrialResult tr;
    tr.epochs.push_back({1.5, 1.2, 0.5});
    tr.test_accuracy = 0.85;
    run.trials.push_back(tr);
    run.report.accuracy = 0.85;
    run.report.per_trial = {0.85};
    run.report.mean = 0.85;
    run.report.stddev = 0.0;
    run.report.single_trial = true;
    run.report.confusion.assign(8, std::vector<long>(8, 0));
    run.report.confusion[0][0] = 17;
    run.report.confusion[1][0] = 3;

    EmotionSet set = EmotionSet::fer_default();
    write_metrics(run, {{"scheme", "cel"}}, set, tmp.file(""));

    std::string json1 = read_file(tmp.file("metrics.json"));
    std::string csv1 = read_file(tmp.file("confusion.csv"));
    CHECK(json1.find("\"accuracy\": 0.85") != std::string::npos);
    CHECK(csv1.find("neutral,17,0,0,0,0,0,0,0") != std::string::npos);

    // CSV row sums match the JSON per-class counts
    auto doc = nlohmann::json::parse(json1);
    CHECK(doc.at("report").at("per_class_counts")[0] == 17);
    CHECK(doc.at("report").at("per_class_counts")[1] == 3);

    // byte-identical on rewrite
    write_metrics(run, {{"scheme", "cel"}}, set, tmp.file(""));
    CHECK(read_file(tmp.file("metrics.json")) == json1);
    CHECK(read_file(tmp.file("confusion.csv")) == csv1);
}

TEST_CASE("ingest determinism: same file loads to the same dataset") {
    TempDir tmp;
    SyntheticSpec spec;
    spec.items = 40;
    spec.image_size = 8;
    spec.seed = 12;
    std::string path = tmp.file("d.csv");
    write_synthetic_csv(spec, EmotionSet::fer_default(), path);
    LoadOptions opts;
    opts.source_size = 8;
    opts.target_size = 8;
    auto a = load_dataset(path, EmotionSet::fer_default(), opts);
    auto b = load_dataset(path, EmotionSet::fer_default(), opts);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.v == b[i].image.v);
        CHECK(a[i].dist.p == b[i].dist.p);
    }
    CHECK(file_hash(path) == file_hash(path));
}
