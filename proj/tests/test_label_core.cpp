#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ferkit/label_core.hpp"
#include "ferkit/rng.hpp"

using namespace ferkit;

namespace {

VoteCounts make_counts(std::vector<long> c) {
    VoteCounts vc;
    vc.counts = std::move(c);
    vc.total = 0;
    for (long v : vc.counts) vc.total += v;
    return vc;
}

VoteCounts random_counts(Rng& rng, std::size_t k, long max_per) {
    std::vector<long> c(k);
    for (long& v : c) v = static_cast<long>(rng.uniform_int(max_per + 1));
    return make_counts(c);
}

} // namespace

TEST_CASE("tally_votes counts occurrences") {
    EmotionSet set = EmotionSet::fer_default();
    VoteCounts vc = tally_votes({0, 0, 1}, set);
    CHECK(vc.counts == std::vector<long>{2, 1, 0, 0, 0, 0, 0, 0});
    CHECK(vc.total == 3);

    VoteCounts u = tally_votes(std::vector<int>(10, 3), set);
    CHECK(u.counts[3] == 10);
    CHECK(u.total == 10);
}

TEST_CASE("tally_votes rejects malformed annotations") {
    EmotionSet set = EmotionSet::fer_default();
    CHECK_THROWS_AS(tally_votes({}, set), std::invalid_argument);
    CHECK_THROWS_AS(tally_votes({0, 8}, set), std::invalid_argument);
    CHECK_THROWS_AS(tally_votes({-1}, set), std::invalid_argument);
}

TEST_CASE("reject_outliers zeroes small counts and recomputes total") {
    VoteCounts vc = make_counts({7, 1, 2, 0, 0, 0, 0, 0});
    VoteCounts out = reject_outliers(vc, 1);
    CHECK(out.counts == std::vector<long>{7, 0, 2, 0, 0, 0, 0, 0});
    CHECK(out.total == 9);

    VoteCounts unanimous = make_counts({10, 0, 0, 0, 0, 0, 0, 0});
    CHECK(reject_outliers(unanimous, 1).counts == unanimous.counts);
    CHECK(reject_outliers(unanimous, 1).total == 10);

    // all entries <= threshold: unusable signal
    VoteCounts spread = make_counts({1, 1, 1, 1, 1, 1, 1, 1});
    VoteCounts z = reject_outliers(spread, 1);
    CHECK_FALSE(z.usable());
    CHECK(z.total == 0);
}

TEST_CASE("reject_outliers threshold 0 is the identity") {
    Rng rng(7);
    for (int it = 0; it < 200; ++it) {
        VoteCounts vc = random_counts(rng, 8, 10);
        VoteCounts out = reject_outliers(vc, 0);
        CHECK(out.counts == vc.counts);
        CHECK(out.total == vc.total);
    }
}

TEST_CASE("reject_outliers is idempotent and never increases counts") {
    Rng rng(11);
    for (int it = 0; it < 500; ++it) {
        VoteCounts vc = random_counts(rng, 8, 6);
        long thr = static_cast<long>(rng.uniform_int(5));
        VoteCounts once = reject_outliers(vc, thr);
        VoteCounts twice = reject_outliers(once, thr);
        CHECK(once.counts == twice.counts);
        for (std::size_t k = 0; k < 8; ++k) {
            CHECK(once.counts[k] <= vc.counts[k]);
            if (vc.counts[k] == 0) CHECK(once.counts[k] == 0);
        }
    }
}

TEST_CASE("normalize produces a probability vector") {
    VoteCounts vc = make_counts({7, 0, 2, 0, 0, 0, 0, 0});
    LabelDistribution d = normalize(vc);
    CHECK(d.p[0] == doctest::Approx(7.0 / 9.0));
    CHECK(d.p[2] == doctest::Approx(2.0 / 9.0));

    CHECK(normalize(make_counts({10, 0})).p == std::vector<double>{1.0, 0.0});
    CHECK(normalize(make_counts({5, 5})).p == std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(normalize(make_counts({0, 0})), std::invalid_argument);
}

TEST_CASE("normalize after rejection sums to 1 within 1e-9") {
    Rng rng(3);
    for (int it = 0; it < 1000; ++it) {
        VoteCounts vc = random_counts(rng, 8, 10);
        VoteCounts out = reject_outliers(vc, 1);
        if (!out.usable()) continue;
        LabelDistribution d = normalize(out);
        double sum = 0.0;
        for (double p : d.p) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("majority_class with lowest-index tie rule") {
    CHECK(majority_class(LabelDistribution{{0.5, 0.3, 0.2}}) == 0);
    CHECK(majority_class(LabelDistribution{{0.5, 0.5, 0.0}}) == 0);
    CHECK(majority_class(LabelDistribution{{0, 0, 0, 0, 0, 0, 0, 1}}) == 7);
}

TEST_CASE("normalization is argmax-invariant") {
    Rng rng(19);
    for (int it = 0; it < 500; ++it) {
        VoteCounts vc = random_counts(rng, 8, 10);
        if (vc.total == 0) continue;
        CHECK(majority_class(normalize(vc)) == majority_class(vc));
    }
}

TEST_CASE("emotion set validation") {
    CHECK_THROWS_AS(EmotionSet({"only"}), std::invalid_argument);
    CHECK_THROWS_AS(EmotionSet({"a", "a"}), std::invalid_argument);
    EmotionSet set = EmotionSet::fer_default();
    CHECK(set.size() == 8);
    CHECK(set.index_of("contempt") == 7);
    CHECK(set.index_of("boredom") == -1);
}
