#include "ferkit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

namespace ferkit {

void mean_stddev(const std::vector<double>& xs, double& mean, double& stddev) {
    mean = 0.0;
    stddev = 0.0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    // population stddev: the convention used by the per-trial accuracy tables
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    stddev = std::sqrt(ss / static_cast<double>(xs.size()));
}

namespace {

// stream-id spaces inside an epoch
constexpr std::uint64_t kShuffleStream = 0;
constexpr std::uint64_t kPldStreamBase = 1u << 20;
constexpr std::uint64_t kExampleStreamBase = 1u << 21;

std::uint64_t epoch_seed(std::uint64_t trial_seed, std::size_t epoch) {
    return trial_seed ^ ((epoch + 1) * 0x9E3779B97F4A7C15ull);
}

std::size_t argmax_lowest(const std::vector<double>& q) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < q.size(); ++k)
        if (q[k] > q[best]) best = k;
    return best;
}

struct ExampleResult {
    double loss = 0.0;
};

// Forward/backward one example into the given model's gradient buffers.
ExampleResult process_example(Model& model,
                              const DatasetItem& item,
                              const TrainConfig& cfg,
                              const std::optional<TrainingTarget>& epoch_draw,
                              Rng& ex_rng) {
    Tensor img = item.image;
    if (cfg.augment_enabled) img = random_affine(img, cfg.augment, ex_rng);

    PredictedDistribution pred = model.forward(img, &ex_rng, true);

    std::optional<TrainingTarget> drawn = epoch_draw;
    if (cfg.scheme.id == SchemeId::PLD && cfg.pld_redraw_per_visit)
        drawn = draw_pld(item.dist, ex_rng);

    ExampleResult res;
    res.loss = scheme_loss(cfg.scheme, item.dist, pred, drawn);
    model.backward(grad_logits(cfg.scheme, item.dist, pred, drawn));
    return res;
}

} // namespace

double train_epoch(Model& model,
                   const std::vector<const DatasetItem*>& items,
                   const TrainConfig& cfg,
                   double learning_rate,
                   std::size_t epoch_index,
                   SgdState& state) {
    if (items.empty()) throw std::invalid_argument("empty training dataset");

    const std::uint64_t eseed = epoch_seed(cfg.seed, epoch_index);
    const std::size_t n = items.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    {
        Rng r = Rng::derive(eseed, kShuffleStream);
        for (std::size_t i = n; i-- > 1;)
            std::swap(order[i], order[static_cast<std::size_t>(r.uniform_int(i + 1))]);
    }

    // one PLD draw per example at epoch start
    std::vector<std::optional<TrainingTarget>> epoch_draws(n);
    if (cfg.scheme.id == SchemeId::PLD && !cfg.pld_redraw_per_visit) {
        for (std::size_t i = 0; i < n; ++i) {
            Rng r = Rng::derive(eseed, kPldStreamBase + i);
            epoch_draws[i] = draw_pld(items[i]->dist, r);
        }
    }

    std::vector<Tensor*> params = model.parameters();
    std::vector<Tensor*> grads = model.gradients();
    if (state.velocity.size() != params.size()) {
        state.velocity.clear();
        for (Tensor* p : params) state.velocity.push_back(Tensor::zeros(p->shape));
    }

    const std::size_t workers =
        std::min<std::size_t>(std::max<std::size_t>(cfg.workers, 1), n);
    std::vector<Model> replicas;
    if (workers > 1)
        for (std::size_t w = 0; w + 1 < workers; ++w) replicas.push_back(model.clone());

    double total_loss = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
        const std::size_t end = std::min(begin + cfg.batch_size, n);
        const std::size_t bn = end - begin;
        model.zero_grads();

        if (workers <= 1 || bn < 2 * workers) {
            for (std::size_t pos = begin; pos < end; ++pos) {
                Rng ex_rng = Rng::derive(eseed, kExampleStreamBase + pos);
                const std::size_t idx = order[pos];
                total_loss +=
                    process_example(model, *items[idx], cfg, epoch_draws[idx], ex_rng).loss;
            }
        } else {
            // fan out over worker replicas sharing the master parameters;
            // gradients are reduced in fixed worker order
            for (auto& rep : replicas) {
                auto rp = rep.parameters();
                for (std::size_t t = 0; t < params.size(); ++t) rp[t]->v = params[t]->v;
                rep.zero_grads();
            }
            std::vector<double> wloss(workers, 0.0);
            auto work = [&](std::size_t w, Model& m) {
                const std::size_t chunk = (bn + workers - 1) / workers;
                const std::size_t lo = begin + w * chunk;
                const std::size_t hi = std::min(lo + chunk, end);
                for (std::size_t pos = lo; pos < hi; ++pos) {
                    Rng ex_rng = Rng::derive(eseed, kExampleStreamBase + pos);
                    const std::size_t idx = order[pos];
                    wloss[w] +=
                        process_example(m, *items[idx], cfg, epoch_draws[idx], ex_rng).loss;
                }
            };
            std::vector<std::thread> threads;
            for (std::size_t w = 1; w < workers; ++w)
                threads.emplace_back(work, w, std::ref(replicas[w - 1]));
            work(0, model);
            for (auto& t : threads) t.join();
            for (std::size_t w = 1; w < workers; ++w) {
                auto rg = replicas[w - 1].gradients();
                for (std::size_t t = 0; t < grads.size(); ++t)
                    for (std::size_t i = 0; i < grads[t]->v.size(); ++i)
                        grads[t]->v[i] += rg[t]->v[i];
            }
            for (std::size_t w = 0; w < workers; ++w) total_loss += wloss[w];
        }

        // mean-over-batch scaling, then SGD with momentum
        const double inv = 1.0 / static_cast<double>(bn);
        for (std::size_t t = 0; t < params.size(); ++t) {
            Tensor& v = state.velocity[t];
            for (std::size_t i = 0; i < v.v.size(); ++i) {
                v.v[i] = cfg.momentum * v.v[i] - learning_rate * grads[t]->v[i] * inv;
                params[t]->v[i] += v.v[i];
            }
        }
    }
    return total_loss / static_cast<double>(n);
}

EvalReport evaluate(Model& model, const std::vector<const DatasetItem*>& items) {
    if (items.empty()) throw std::invalid_argument("empty evaluation dataset");
    const std::size_t k = model.output_size();
    EvalReport rep;
    rep.confusion.assign(k, std::vector<long>(k, 0));
    long correct = 0;
    for (const DatasetItem* item : items) {
        PredictedDistribution pred = model.forward(item->image, nullptr, false);
        const std::size_t guess = argmax_lowest(pred.q);
        const std::size_t truth = majority_class(item->dist);
        ++rep.confusion[truth][guess];
        if (guess == truth) ++correct;
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(items.size());
    return rep;
}

double any_admitted_accuracy(Model& model,
                             const std::vector<const DatasetItem*>& items,
                             double theta) {
    if (items.empty()) throw std::invalid_argument("empty evaluation dataset");
    long hit = 0;
    for (const DatasetItem* item : items) {
        PredictedDistribution pred = model.forward(item->image, nullptr, false);
        TrainingTarget adm = admitted_set(item->dist, theta);
        if (adm.admitted[argmax_lowest(pred.q)]) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(items.size());
}

double dataset_cel_loss(Model& model, const std::vector<const DatasetItem*>& items) {
    if (items.empty()) throw std::invalid_argument("empty dataset");
    Scheme cel{SchemeId::CEL, 0.30};
    double total = 0.0;
    for (const DatasetItem* item : items) {
        PredictedDistribution pred = model.forward(item->image, nullptr, false);
        total += scheme_loss(cel, item->dist, pred);
    }
    return total / static_cast<double>(items.size());
}

TrialRun run_trials(const std::vector<DatasetItem>& data,
                    const TrainConfig& cfg,
                    const std::function<Model()>& make_model) {
    if (cfg.trials < 1) throw std::invalid_argument("trials must be >= 1");
    auto train = filter_split(data, Split::Train);
    auto val = filter_split(data, Split::Validation);
    auto test = filter_split(data, Split::Test);
    if (train.empty()) throw std::invalid_argument("training split is empty");
    if (test.empty()) throw std::invalid_argument("test split is empty");

    TrialRun out;
    double best_acc = -1.0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const std::uint64_t trial_seed = cfg.seed + t;
        Model model = make_model();
        {
            Rng init = Rng::derive(trial_seed, 0xA111);
            model.init_params(init);
        }
        TrainConfig tcfg = cfg;
        tcfg.seed = trial_seed;

        SgdState sgd;
        TrialResult trial;
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            double lr = cfg.learning_rate;
            if (cfg.lr_step_decay && 3 * epoch >= 2 * cfg.epochs) lr *= 0.1;
            EpochStats es;
            es.train_loss = train_epoch(model, train, tcfg, lr, epoch, sgd);
            if (!val.empty()) {
                es.val_loss = dataset_cel_loss(model, val);
                es.val_accuracy = evaluate(model, val).accuracy;
            }
            trial.epochs.push_back(es);
        }
        // final-epoch model is what gets evaluated
        EvalReport te = evaluate(model, test);
        trial.test_accuracy = te.accuracy;
        trial.confusion = te.confusion;
        trial.any_admitted_accuracy = any_admitted_accuracy(model, test, cfg.scheme.ml_theta);
        out.result.report.per_trial.push_back(te.accuracy);
        if (te.accuracy > best_acc) {
            best_acc = te.accuracy;
            out.result.report.accuracy = te.accuracy;
            out.result.report.confusion = te.confusion;
            out.best_model = std::move(model);
        }
        out.result.trials.push_back(std::move(trial));
    }
    mean_stddev(out.result.report.per_trial, out.result.report.mean,
                out.result.report.stddev);
    out.result.report.single_trial = cfg.trials == 1;
    return out;
}

} // namespace ferkit
