// ferkit: crowd-label aggregation + scheme-based CNN training toolkit.
//
// Subcommands: train, eval, aggregate, quality-curve, gradcheck, synth-data.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
// All randomness derives from --seed; ties in majorities break to the
// lowest category index.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ferkit/dataio.hpp"
#include "ferkit/quality_sim.hpp"
#include "ferkit/synthetic.hpp"
#include "ferkit/trainer.hpp"

using nlohmann::json;
using namespace ferkit;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
    return os.str();
}

void write_manifest(const std::string& dir, const std::string& command,
                    const json& config, std::uint64_t seed,
                    const std::string& data_path) {
    json m;
    m["command"] = command;
    m["config"] = config;
    m["seed"] = seed;
    m["version"] = kVersion;
    m["timestamp"] = timestamp_utc();
    if (!data_path.empty()) {
        std::ostringstream h;
        h << std::hex << std::setfill('0') << std::setw(16) << file_hash(data_path);
        m["input_file"] = data_path;
        m["input_hash_fnv1a64"] = h.str();
    }
    std::ofstream os(std::filesystem::path(dir) / "manifest.json");
    os << m.dump(2) << "\n";
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string scheme = "mv";
    std::string arch = "toy";
    std::size_t trials = 5;
    std::uint64_t seed = 0;
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double lr = 0.01;
    double momentum = 0.9;
    bool no_decay = false;
    std::size_t toy_blocks = 2;
    std::size_t input_size = 0; // 0: vgg13 -> 64, toy -> source size
    std::size_t source_size = 48;
    double ml_threshold = 0.3;
    long outlier_threshold = 1;
    bool keep_rejected = false;
    bool pld_per_visit = false;
    double aug_rotate = 0.0;
    double aug_scale = 0.0;
    double aug_translate = 0.0;
    bool aug_flip = false;
    std::size_t workers = 1;
};

json echo_config(const TrainArgs& a, std::size_t input_size) {
    return {{"data", a.data},
            {"scheme", a.scheme},
            {"arch", a.arch},
            {"trials", a.trials},
            {"seed", a.seed},
            {"epochs", a.epochs},
            {"batch_size", a.batch_size},
            {"learning_rate", a.lr},
            {"momentum", a.momentum},
            {"lr_step_decay", !a.no_decay},
            {"toy_blocks", a.toy_blocks},
            {"input_size", input_size},
            {"source_size", a.source_size},
            {"ml_threshold", a.ml_threshold},
            {"outlier_threshold", a.outlier_threshold},
            {"keep_rejected", a.keep_rejected},
            {"pld_per_visit", a.pld_per_visit},
            {"aug_rotate", a.aug_rotate},
            {"aug_scale", a.aug_scale},
            {"aug_translate", a.aug_translate},
            {"aug_flip", a.aug_flip},
            {"workers", a.workers}};
}

std::string default_out_dir(std::uint64_t seed) {
    return "runs/" + timestamp_utc() + "-seed" + std::to_string(seed);
}

int cmd_train(const TrainArgs& a) {
    EmotionSet set = EmotionSet::fer_default();
    std::size_t input = a.input_size;
    if (input == 0) input = (a.arch == "vgg13") ? 64 : a.source_size;

    LoadOptions opts;
    opts.source_size = a.source_size;
    opts.target_size = input;
    opts.outlier_threshold = a.outlier_threshold;
    opts.keep_rejected_raw = a.keep_rejected;
    LoadStats stats;
    auto data = load_dataset(a.data, set, opts, &stats);
    std::cerr << "loaded " << stats.loaded << " items (" << stats.dropped_unusable
              << " dropped as unusable)\n";

    TrainConfig cfg;
    cfg.scheme = parse_scheme(a.scheme, a.ml_threshold);
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.lr_step_decay = !a.no_decay;
    cfg.seed = a.seed;
    cfg.trials = a.trials;
    cfg.outlier_threshold = a.outlier_threshold;
    cfg.pld_redraw_per_visit = a.pld_per_visit;
    cfg.workers = a.workers;
    cfg.augment_enabled =
        a.aug_rotate > 0 || a.aug_scale > 0 || a.aug_translate > 0 || a.aug_flip;
    cfg.augment.max_rotation_deg = a.aug_rotate;
    cfg.augment.max_scale_delta = a.aug_scale;
    cfg.augment.max_translate_px = a.aug_translate;
    cfg.augment.flip_horizontal = a.aug_flip;

    auto make_model = [&]() {
        return a.arch == "vgg13" ? build_vgg13(input, set.size())
                                 : build_toy(input, set.size(), a.toy_blocks);
    };

    TrialRun run = run_trials(data, cfg, make_model);

    std::string out = a.out.empty() ? default_out_dir(a.seed) : a.out;
    std::filesystem::create_directories(out);
    json config = echo_config(a, input);
    write_metrics(run.result, config, set, out + "/");
    save_checkpoint(run.best_model,
                    {{"seed", a.seed}, {"epochs", a.epochs}, {"scheme", a.scheme}},
                    out + "/checkpoint.ckpt");
    write_manifest(out, "train", config, a.seed, a.data);

    std::cout << "scheme " << a.scheme << ": per-trial";
    for (double acc : run.result.report.per_trial)
        std::cout << " " << std::fixed << std::setprecision(4) << acc;
    std::cout << "  mean " << run.result.report.mean << " +/- "
              << run.result.report.stddev << "\n";
    std::cout << "outputs in " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& data_path, const std::string& ckpt_path,
             const std::string& split, std::size_t source_size,
             long outlier_threshold, const std::string& out_dir) {
    EmotionSet set = EmotionSet::fer_default();
    Checkpoint ck = load_checkpoint(ckpt_path, set.size());

    // infer the model input size from the first conv/dense path
    LoadOptions opts;
    opts.source_size = source_size;
    opts.outlier_threshold = outlier_threshold;
    // probe: try source size first, else standard 64
    opts.target_size = source_size;
    auto data = load_dataset(data_path, set, opts);
    Split s = split == "train" ? Split::Train
              : split == "validation" ? Split::Validation
                                      : Split::Test;
    auto items = filter_split(data, s);
    if (items.empty()) throw std::runtime_error("split '" + split + "' is empty");

    EvalReport rep = evaluate(ck.model, items);
    rep.per_trial = {rep.accuracy};
    rep.mean = rep.accuracy;
    rep.single_trial = true;

    std::cout << "accuracy on " << split << ": " << std::fixed
              << std::setprecision(4) << rep.accuracy << " (" << items.size()
              << " items)\n";
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        RunResult rr;
        rr.report = rep;
        json config = {{"data", data_path}, {"checkpoint", ckpt_path}, {"split", split}};
        write_metrics(rr, config, set, out_dir + "/");
        write_manifest(out_dir, "eval", config, 0, data_path);
    }
    return 0;
}

int cmd_aggregate(const std::string& votes_path, long threshold,
                  const std::string& out_path, bool keep_rejected) {
    EmotionSet set = EmotionSet::fer_default();
    std::ifstream in(votes_path);
    if (!in) throw std::runtime_error("cannot open " + votes_path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty votes file");
    std::vector<int> cols;
    {
        std::stringstream ss(line);
        std::string name;
        while (std::getline(ss, name, ',')) cols.push_back(set.index_of(name));
    }

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::trunc);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        os = &file;
    }
    for (std::size_t k = 0; k < set.size(); ++k) *os << (k ? "," : "") << set.name(k);
    *os << ",majority\n";

    std::size_t lineno = 1, dropped = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        VoteCounts vc;
        vc.counts.assign(set.size(), 0);
        std::stringstream ss(line);
        std::string field;
        std::size_t c = 0;
        while (std::getline(ss, field, ',')) {
            if (c >= cols.size())
                throw std::runtime_error("line " + std::to_string(lineno) +
                                         ": too many fields");
            long v = std::stol(field);
            if (cols[c] >= 0) {
                vc.counts[static_cast<std::size_t>(cols[c])] += v;
                vc.total += v;
            }
            ++c;
        }
        VoteCounts cleaned = reject_outliers(vc, threshold);
        if (!cleaned.usable()) {
            if (keep_rejected) cleaned = vc;
            else {
                ++dropped;
                continue;
            }
        }
        LabelDistribution d = normalize(cleaned);
        for (std::size_t k = 0; k < d.size(); ++k) *os << (k ? "," : "") << d.p[k];
        *os << "," << set.name(majority_class(d)) << "\n";
    }
    if (dropped)
        std::cerr << dropped << " items dropped (all votes at or below threshold)\n";
    return 0;
}

int cmd_quality_curve(const std::string& tags_path, std::size_t synth_items,
                      double synth_noise, std::size_t taggers, std::size_t classes,
                      std::size_t resamples, std::uint64_t seed,
                      const std::string& out_path) {
    std::vector<TagList> items;
    if (!tags_path.empty()) {
        std::ifstream in(tags_path);
        if (!in) throw std::runtime_error("cannot open " + tags_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            TagList tags;
            std::stringstream ss(line);
            int t;
            while (ss >> t) tags.push_back(t);
            items.push_back(std::move(tags));
        }
    } else {
        std::vector<int> labels(synth_items);
        for (std::size_t i = 0; i < synth_items; ++i)
            labels[i] = static_cast<int>(i % classes);
        Rng rng = Rng::derive(seed, 1);
        items = synth_votes(labels, TaggerNoiseModel::symmetric(classes, synth_noise),
                            taggers, rng);
    }
    QualityCurve curve = quality_curve(items, classes, resamples, seed);

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path, std::ios::trunc);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        os = &file;
    }
    *os << "m\tagreement\tn_items\tn_resamples\n";
    for (const auto& p : curve.points)
        *os << p.taggers << "\t" << p.agreement << "\t" << curve.n_items << "\t"
            << curve.n_resamples << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& scheme_name_, const std::string& arch,
                  double ml_threshold, std::uint64_t seed, std::size_t input_size,
                  std::size_t blocks, std::size_t max_coords) {
    Scheme scheme = parse_scheme(scheme_name_, ml_threshold);
    Model m = arch == "vgg13" ? build_vgg13(input_size, 8)
                              : build_toy(input_size, 8, blocks);
    if (m.param_count() >= 100000)
        throw std::runtime_error("model too large for finite differences (" +
                                 std::to_string(m.param_count()) + " parameters)");
    Rng rng(seed);
    Rng init = Rng::derive(seed, 1);
    m.init_params(init);

    Tensor img = Tensor::zeros({1, input_size, input_size});
    for (double& v : img.v) v = rng.uniform();
    LabelDistribution dist;
    dist.p.resize(8);
    double sum = 0;
    for (double& p : dist.p) {
        p = rng.uniform() + 1e-3;
        sum += p;
    }
    for (double& p : dist.p) p /= sum;

    GradCheckReport rep = gradient_check(m, img, dist, scheme, rng, false, 1e-5, max_coords);
    std::cout << "scheme " << scheme_name_ << ": checked " << rep.checked
              << " coordinates, max rel err " << std::scientific << rep.max_rel_err
              << " (tensor " << rep.worst_tensor << " coord " << rep.worst_coord
              << ": analytic " << rep.analytic << " numeric " << rep.numeric << ")\n";
    if (rep.max_rel_err >= 1e-5) {
        std::cerr << "FAIL: max relative error exceeds 1e-5\n";
        return 1;
    }
    return 0;
}

int cmd_synth_data(const std::string& out_path, std::size_t items, std::size_t size,
                   std::size_t taggers, double noise, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.items = items;
    spec.image_size = size;
    spec.taggers = taggers;
    spec.tagger_noise = noise;
    spec.seed = seed;
    write_synthetic_csv(spec, EmotionSet::fer_default(), out_path);
    std::cout << "wrote " << items << " items to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowd-label aggregation and scheme-based CNN training toolkit\n"
                 "All randomness derives from --seed; majority-vote and argmax ties\n"
                 "break to the lowest category index, so runs are reproducible."};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train with a scheme over N trials");
    train->add_option("--data", ta.data, "dataset CSV")->required();
    train->add_option("--scheme", ta.scheme, "mv|ml|pld|cel")->default_val("mv");
    train->add_option("--trials", ta.trials);
    train->add_option("--seed", ta.seed);
    train->add_option("--epochs", ta.epochs);
    train->add_option("--batch-size", ta.batch_size);
    train->add_option("--lr", ta.lr);
    train->add_option("--momentum", ta.momentum);
    train->add_flag("--no-decay", ta.no_decay, "disable the 2/3-epoch x0.1 step decay");
    train->add_option("--arch", ta.arch, "vgg13|toy")->default_val("toy");
    train->add_option("--toy-blocks", ta.toy_blocks);
    train->add_option("--input-size", ta.input_size, "0 = auto");
    train->add_option("--source-size", ta.source_size, "declared image side in the CSV");
    train->add_option("--ml-threshold", ta.ml_threshold, "ML admission threshold theta");
    train->add_option("--outlier-threshold", ta.outlier_threshold,
                      "votes <= threshold are zeroed before normalization");
    train->add_flag("--keep-rejected", ta.keep_rejected,
                    "keep pre-rejection counts for fully rejected items");
    train->add_flag("--pld-per-visit", ta.pld_per_visit,
                    "redraw the PLD target at every visit instead of per epoch");
    train->add_option("--aug-rotate", ta.aug_rotate, "max rotation, degrees");
    train->add_option("--aug-scale", ta.aug_scale, "max scale delta, fraction");
    train->add_option("--aug-translate", ta.aug_translate, "max translation, pixels");
    train->add_flag("--aug-flip", ta.aug_flip, "random horizontal flip");
    train->add_option("--workers", ta.workers, "batch fan-out width");
    train->add_option("--out", ta.out, "output directory (default runs/<time>-<seed>)");

    std::string ev_data, ev_ckpt, ev_split = "test", ev_out;
    std::size_t ev_source = 48;
    long ev_thresh = 1;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--split", ev_split, "train|validation|test");
    ev->add_option("--source-size", ev_source);
    ev->add_option("--outlier-threshold", ev_thresh);
    ev->add_option("--out", ev_out, "optional output directory");

    std::string ag_votes, ag_out;
    long ag_thresh = 1;
    bool ag_keep = false;
    auto* ag = app.add_subcommand("aggregate",
                                  "votes CSV -> normalized distributions CSV");
    ag->add_option("--votes", ag_votes, "CSV: header of emotion names, rows of counts")
        ->required();
    ag->add_option("--threshold", ag_thresh);
    ag->add_flag("--keep-rejected", ag_keep);
    ag->add_option("--out", ag_out, "output CSV (default stdout)");

    std::string qc_tags, qc_out;
    std::size_t qc_items = 1000, qc_taggers = 10, qc_classes = 8, qc_resamples = 100;
    double qc_noise = 0.3;
    std::uint64_t qc_seed = 0;
    auto* qc = app.add_subcommand("quality-curve",
                                  "tagger-count vs majority-agreement TSV");
    qc->add_option("--tags", qc_tags, "file of per-item tag index lines (default: synthetic)");
    qc->add_option("--synthetic-items", qc_items);
    qc->add_option("--noise", qc_noise, "synthetic tagger noise");
    qc->add_option("--taggers", qc_taggers);
    qc->add_option("--classes", qc_classes);
    qc->add_option("--resamples", qc_resamples);
    qc->add_option("--seed", qc_seed);
    qc->add_option("--out", qc_out, "output TSV (default stdout)");

    std::string gc_scheme = "cel";
    double gc_theta = 0.3;
    std::uint64_t gc_seed = 0;
    std::size_t gc_input = 8, gc_blocks = 1, gc_coords = 0;
    auto* gc = app.add_subcommand("gradcheck",
                                  "finite-difference check of end-to-end gradients");
    gc->add_option("--scheme", gc_scheme, "mv|ml|pld|cel");
    std::string gc_arch = "toy";
    gc->add_option("--arch", gc_arch, "toy (vgg13 is too large for finite differences)");
    gc->add_option("--ml-threshold", gc_theta);
    gc->add_option("--seed", gc_seed);
    gc->add_option("--input-size", gc_input);
    gc->add_option("--blocks", gc_blocks);
    gc->add_option("--max-coords", gc_coords, "0 = all coordinates");

    std::string sd_out;
    std::size_t sd_items = 2000, sd_size = 16, sd_taggers = 10;
    double sd_noise = 0.2;
    std::uint64_t sd_seed = 0;
    auto* sd = app.add_subcommand("synth-data", "write a synthetic dataset CSV");
    sd->add_option("--out", sd_out)->required();
    sd->add_option("--items", sd_items);
    sd->add_option("--size", sd_size, "image side length");
    sd->add_option("--taggers", sd_taggers);
    sd->add_option("--noise", sd_noise, "symmetric tagger noise");
    sd->add_option("--seed", sd_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (*train) return cmd_train(ta);
        if (*ev) return cmd_eval(ev_data, ev_ckpt, ev_split, ev_source, ev_thresh, ev_out);
        if (*ag) return cmd_aggregate(ag_votes, ag_thresh, ag_out, ag_keep);
        if (*qc)
            return cmd_quality_curve(qc_tags, qc_items, qc_noise, qc_taggers,
                                     qc_classes, qc_resamples, qc_seed, qc_out);
        if (*gc)
            return cmd_gradcheck(gc_scheme, gc_arch, gc_theta, gc_seed, gc_input,
                                 gc_blocks, gc_coords);
        if (*sd) return cmd_synth_data(sd_out, sd_items, sd_size, sd_taggers, sd_noise, sd_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
