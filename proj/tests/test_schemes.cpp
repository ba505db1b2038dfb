#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ferkit/rng.hpp"
#include "ferkit/schemes.hpp"

using namespace ferkit;

namespace {

LabelDistribution random_dist(Rng& rng, std::size_t k) {
    LabelDistribution d;
    d.p.resize(k);
    double sum = 0.0;
    for (double& p : d.p) {
        p = rng.uniform() + 1e-3;
        sum += p;
    }
    for (double& p : d.p) p /= sum;
    return d;
}

std::vector<double> random_logits(Rng& rng, std::size_t k) {
    std::vector<double> l(k);
    for (double& v : l) v = rng.uniform(-3.0, 3.0);
    return l;
}

// independent oracle: central differences of the frozen-target scheme
// loss w.r.t. each logit
double numeric_logit_grad(const Scheme& scheme, const LabelDistribution& dist,
                          std::vector<double> logits, std::size_t j,
                          const std::optional<TrainingTarget>& drawn) {
    const double eps = 1e-6;
    logits[j] += eps;
    double lp = scheme_loss(scheme, dist, softmax(logits), drawn);
    logits[j] -= 2 * eps;
    double lm = scheme_loss(scheme, dist, softmax(logits), drawn);
    return (lp - lm) / (2 * eps);
}

} // namespace

TEST_CASE("target_mv picks the majority with the tie rule") {
    CHECK(target_mv(LabelDistribution{{0.6, 0.4, 0.0}}).index == 0);
    CHECK(target_mv(LabelDistribution{{0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125}}).index == 0);
    CHECK(target_mv(LabelDistribution{{0.0, 1.0, 0.0}}).index == 1);
}

TEST_CASE("admitted_set thresholding and fallback") {
    TrainingTarget t = admitted_set(LabelDistribution{{0.4, 0.35, 0.25}}, 0.3);
    CHECK(t.admitted == std::vector<bool>{true, true, false});

    t = admitted_set(LabelDistribution{{1.0, 0.0, 0.0}}, 0.3);
    CHECK(t.admitted == std::vector<bool>{true, false, false});

    LabelDistribution uniform{std::vector<double>(8, 0.125)};
    t = admitted_set(uniform, 0.3);
    std::vector<bool> expect(8, false);
    expect[0] = true; // fallback to majority under the tie rule
    CHECK(t.admitted == expect);
}

TEST_CASE("loss_ce worked values") {
    PredictedDistribution pred = softmax({0.0, 0.0});
    TrainingTarget one;
    one.kind = TrainingTarget::Kind::OneHot;
    one.index = 0;
    CHECK(loss_ce(one, pred) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    TrainingTarget distT;
    distT.kind = TrainingTarget::Kind::Distribution;
    distT.dist = LabelDistribution{{0.5, 0.5}};
    CHECK(loss_ce(distT, pred) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("distribution CE on a one-hot target equals one-hot CE exactly") {
    Rng rng(5);
    for (int it = 0; it < 200; ++it) {
        std::size_t k = 2 + rng.uniform_int(7);
        PredictedDistribution pred = softmax(random_logits(rng, k));
        std::size_t j = rng.uniform_int(k);
        TrainingTarget one;
        one.kind = TrainingTarget::Kind::OneHot;
        one.index = j;
        TrainingTarget distT;
        distT.kind = TrainingTarget::Kind::Distribution;
        distT.dist.p.assign(k, 0.0);
        distT.dist.p[j] = 1.0;
        CHECK(loss_ce(one, pred) == loss_ce(distT, pred));
    }
}

TEST_CASE("loss_ce is finite when q underflows") {
    PredictedDistribution pred;
    pred.logits = {0.0, 0.0};
    pred.q = {1.0, 0.0}; // hard zero
    TrainingTarget one;
    one.kind = TrainingTarget::Kind::OneHot;
    one.index = 1;
    double l = loss_ce(one, pred);
    CHECK(std::isfinite(l));
    CHECK(l == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("loss_ml picks the admitted class the network prefers") {
    PredictedDistribution pred;
    pred.q = {0.2, 0.5, 0.3};
    pred.logits = {std::log(0.2), std::log(0.5), std::log(0.3)};
    MlLoss r = loss_ml(LabelDistribution{{0.4, 0.35, 0.25}}, pred, 0.3);
    CHECK(r.chosen == 1);
    CHECK(r.loss == doctest::Approx(-std::log(0.5)));

    // single admitted class reduces to MV loss
    r = loss_ml(LabelDistribution{{1.0, 0.0, 0.0}}, pred, 0.3);
    CHECK(r.chosen == 0);
    CHECK(r.loss == doctest::Approx(-std::log(0.2)));

    // symmetric tie goes to the lowest index
    PredictedDistribution even = softmax({0.0, 0.0});
    r = loss_ml(LabelDistribution{{0.5, 0.5}}, even, 0.3);
    CHECK(r.chosen == 0);
    CHECK(r.loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("ML loss never exceeds the majority-class CE when majority is admitted") {
    Rng rng(17);
    for (int it = 0; it < 500; ++it) {
        LabelDistribution d = random_dist(rng, 8);
        PredictedDistribution pred = softmax(random_logits(rng, 8));
        TrainingTarget adm = admitted_set(d, 0.3);
        std::size_t maj = majority_class(d);
        if (!adm.admitted[maj]) continue;
        TrainingTarget mv;
        mv.kind = TrainingTarget::Kind::OneHot;
        mv.index = maj;
        CHECK(loss_ml(d, pred, 0.3).loss <= loss_ce(mv, pred) + 1e-15);
    }
}

TEST_CASE("draw_pld degenerate and deterministic") {
    LabelDistribution onehot{{1.0, 0.0, 0.0}};
    Rng rng(1);
    for (int i = 0; i < 100; ++i) CHECK(draw_pld(onehot, rng).index == 0);

    LabelDistribution d{{0.3, 0.7}};
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(draw_pld(d, a).index == draw_pld(d, b).index);
}

TEST_CASE("draw_pld frequencies match the distribution (3 sigma)") {
    LabelDistribution d{{0.5, 0.5}};
    Rng rng(123);
    const int n = 100000;
    int c0 = 0;
    for (int i = 0; i < n; ++i)
        if (draw_pld(d, rng).index == 0) ++c0;
    double f = static_cast<double>(c0) / n;
    // 3 sigma of Binomial(100k, 0.5) is ~0.0047
    CHECK(f > 0.494);
    CHECK(f < 0.506);
}

TEST_CASE("grad_logits hand values and zero-sum") {
    // CEL at q = p has zero gradient
    LabelDistribution d{{0.25, 0.75}};
    PredictedDistribution pred;
    pred.q = d.p;
    pred.logits = {std::log(0.25), std::log(0.75)};
    auto g = grad_logits(Scheme{SchemeId::CEL, 0.3}, d, pred);
    CHECK(g[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(0.0).epsilon(1e-12));

    // MV on p=[1,0], q=[0.5,0.5]
    LabelDistribution oh{{1.0, 0.0}};
    PredictedDistribution half = softmax({0.0, 0.0});
    g = grad_logits(Scheme{SchemeId::MV, 0.3}, oh, half);
    CHECK(g[0] == doctest::Approx(-0.5));
    CHECK(g[1] == doctest::Approx(0.5));
}

TEST_CASE("grad_logits requires a drawn target for PLD") {
    LabelDistribution d{{0.5, 0.5}};
    PredictedDistribution pred = softmax({0.0, 0.0});
    CHECK_THROWS_AS(grad_logits(Scheme{SchemeId::PLD, 0.3}, d, pred),
                    std::invalid_argument);
}

TEST_CASE("grad_logits matches finite differences, 100+ instances per scheme") {
    const Scheme schemes[] = {{SchemeId::MV, 0.3}, {SchemeId::ML, 0.3},
                              {SchemeId::PLD, 0.3}, {SchemeId::CEL, 0.3}};
    Rng rng(2024);
    for (const Scheme& s : schemes) {
        double worst = 0.0;
        for (int it = 0; it < 120; ++it) {
            std::size_t k = 2 + rng.uniform_int(7);
            LabelDistribution d = random_dist(rng, k);
            PredictedDistribution pred = softmax(random_logits(rng, k));

            std::optional<TrainingTarget> drawn;
            if (s.id == SchemeId::PLD) drawn = draw_pld(d, rng);
            if (s.id == SchemeId::ML) {
                TrainingTarget t;
                t.kind = TrainingTarget::Kind::OneHot;
                t.index = loss_ml(d, pred, s.ml_theta).chosen;
                drawn = t;
            }

            auto g = grad_logits(s, d, pred, drawn);
            double gsum = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                double num = numeric_logit_grad(s, d, pred.logits, j, drawn);
                double rel = std::fabs(g[j] - num) /
                             std::max({std::fabs(g[j]), std::fabs(num), 1.0});
                worst = std::max(worst, rel);
                gsum += g[j];
            }
            CHECK(std::fabs(gsum) < 1e-9); // components sum to 0
        }
        INFO("scheme ", scheme_name(s.id));
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("reduction identity on one-hot distributions") {
    Rng rng(99);
    for (int it = 0; it < 1000; ++it) {
        std::size_t k = 2 + rng.uniform_int(7);
        std::size_t j = rng.uniform_int(k);
        LabelDistribution d;
        d.p.assign(k, 0.0);
        d.p[j] = 1.0;
        PredictedDistribution pred = softmax(random_logits(rng, k));

        double mv = scheme_loss(Scheme{SchemeId::MV, 0.3}, d, pred);
        double cel = scheme_loss(Scheme{SchemeId::CEL, 0.3}, d, pred);
        std::optional<TrainingTarget> drawn = draw_pld(d, rng);
        double pld = scheme_loss(Scheme{SchemeId::PLD, 0.3}, d, pred, drawn);
        double ml = loss_ml(d, pred, 0.3).loss;

        CHECK(mv == cel);
        CHECK(mv == pld);
        CHECK(mv == ml);
    }
}

TEST_CASE("PLD expectation equals the CEL loss (Monte Carlo, 3 sigma)") {
    Rng rng(31337);
    LabelDistribution d = random_dist(rng, 8);
    PredictedDistribution pred = softmax(random_logits(rng, 8));
    double cel = scheme_loss(Scheme{SchemeId::CEL, 0.3}, d, pred);

    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        auto t = draw_pld(d, rng);
        double l = loss_ce(t, pred);
        sum += l;
        sumsq += l * l;
    }
    double mean = sum / n;
    double var = (sumsq / n - mean * mean) / n;
    CHECK(std::fabs(mean - cel) < 3.0 * std::sqrt(var));
}

TEST_CASE("scheme parsing") {
    CHECK(parse_scheme("mv").id == SchemeId::MV);
    CHECK(parse_scheme("cel").id == SchemeId::CEL);
    CHECK(parse_scheme("ml", 0.25).ml_theta == 0.25);
    CHECK_THROWS_AS(parse_scheme("nope"), std::invalid_argument);
    CHECK_THROWS_AS(parse_scheme("ml", 1.5), std::invalid_argument);
}
