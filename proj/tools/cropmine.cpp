// cropmine: weak-label refinement toolkit for cropland mapping.
//
// Subcommands cover the full loop: synthesize a scene, cluster imagery,
// extract and filter regions, mine labels against the weak layer, compose
// the extended training mask, train and apply the per-pixel segmenter,
// evaluate masks, run the seven-scenario experiment, and run the whole
// pipeline in one go. Exit codes: 0 success, 1 usage error, 2 data/format
// error, 3 stage failure.

#include "cropmine/benchmark.hpp"
#include "cropmine/clustering.hpp"
#include "cropmine/error.hpp"
#include "cropmine/evaluation.hpp"
#include "cropmine/mining.hpp"
#include "cropmine/pipeline.hpp"
#include "cropmine/png.hpp"
#include "cropmine/raster.hpp"
#include "cropmine/regions.hpp"
#include "cropmine/rng.hpp"
#include "cropmine/segmenter.hpp"
#include "cropmine/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cropmine;
using nlohmann::json;

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << text;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

struct SynthArgs {
    std::string out_dir = "scene";
    std::uint64_t seed = 0;
    int width = 256;
    int height = 256;
    int field_count = 20;
    int background_sites = 14;
    int human_polygons = 67;
    double human_coverage = 0.04056;
    double human_crop_share = 0.72;
    double object_jitter = 0.0; // 0 = per-class defaults from the spectra
    int shift_dx = 3, shift_dy = 3, dilation = 2;
    double flip_rate = 0.10;
    bool render = false;
};

int cmd_synth(const SynthArgs& args) {
    SceneConfig config = default_scene_config(args.width, args.height);
    config.field_count = args.field_count;
    config.background_sites = args.background_sites;
    config.human_polygon_count = args.human_polygons;
    config.human_coverage = args.human_coverage;
    config.human_crop_share = args.human_crop_share;
    config.object_jitter = args.object_jitter;
    config.corruption = {args.shift_dx, args.shift_dy, args.dilation, args.flip_rate};
    config.seed = args.seed;

    const SceneBundle bundle = generate_scene(config, args.seed);
    fs::create_directories(args.out_dir);
    save_raster(bundle.imagery, join_path(args.out_dir, "imagery"));
    save_mask(bundle.truth, join_path(args.out_dir, "truth"));
    save_mask(bundle.weak, join_path(args.out_dir, "weak"));
    save_mask(bundle.human, join_path(args.out_dir, "human"));
    save_scene_manifest(config, args.seed, join_path(args.out_dir, "scene_manifest.json"));
    if (args.render) {
        render_png(bundle.truth, join_path(args.out_dir, "truth.png"));
        render_png(bundle.weak, join_path(args.out_dir, "weak.png"));
        render_png(bundle.human, join_path(args.out_dir, "human.png"));
        render_band_png(bundle.imagery, 3, join_path(args.out_dir, "imagery_b3.png"));
    }
    std::cout << "scene written to " << args.out_dir << "\n";
    return 0;
}

struct ClusterArgs {
    std::vector<std::string> imagery;
    std::string out_dir = ".";
    int k = 10;
    std::size_t sample_size = 20000;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    int max_iters = 100;
    bool no_standardize = false;
    int threads = 1;
};

int cmd_cluster(const ClusterArgs& args) {
    // One model fitted on a pooled sample over every given raster, then each
    // raster assigned with it.
    std::vector<Raster> rasters;
    rasters.reserve(args.imagery.size());
    for (const auto& path : args.imagery) rasters.push_back(load_raster(path));
    std::vector<const Raster*> pointers;
    std::size_t total = 0;
    for (const auto& raster : rasters) {
        pointers.push_back(&raster);
        total += raster.plane();
    }
    const std::size_t n = std::min(args.sample_size, total);
    FeatureMatrix sample = sample_pixels(pointers, n, sub_seed(args.seed, "cluster-sample"));

    FeatureMatrix std_sample;
    BandStats stats;
    if (args.no_standardize) {
        std_sample = std::move(sample);
        stats = BandStats::identity(std_sample.cols);
    } else {
        std::tie(std_sample, stats) = standardize(sample);
    }

    ClusterConfig config;
    config.k = args.k;
    config.tol = args.tol;
    config.max_iters = args.max_iters;
    config.seed = sub_seed(args.seed, "kmeans");
    const ClusterModel model = fit_kmeans(std_sample, stats, config);

    fs::create_directories(args.out_dir);
    save_cluster_model(model, join_path(args.out_dir, "model.json"));
    for (std::size_t i = 0; i < rasters.size(); ++i) {
        const LabelMask cluster_map = assign_clusters(rasters[i], model, args.threads);
        const std::string name =
            rasters.size() == 1 ? "cluster_map" : "cluster_map_" + std::to_string(i);
        save_mask(cluster_map, join_path(args.out_dir, name), model.k);
    }
    std::cout << "k=" << model.k << " inertia=" << model.inertia
              << " iterations=" << model.iterations_run << "\n";
    return 0;
}

struct RegionsArgs {
    std::string cluster_map;
    std::string out_dir = ".";
    int connectivity = 4;
    double q_small = 0.99;
    double q_large = 0.25;
    bool write_mask = false;
};

int cmd_regions(const RegionsArgs& args) {
    const LabelMask cluster_map = load_mask(args.cluster_map);
    const RegionSet all = extract_regions(cluster_map, args.connectivity);
    const FilterOutcome filtered = filter_regions(all, args.q_small, args.q_large);
    if (filtered.all_removed)
        std::cerr << "warning: the sequential filter removed every region\n";

    fs::create_directories(args.out_dir);
    write_text_file(join_path(args.out_dir, "regions.json"),
                    region_set_to_json(filtered.set, all.regions.size()));
    if (args.write_mask)
        save_mask(region_presence_mask(filtered.set),
                  join_path(args.out_dir, "filtered_regions"));
    std::cout << all.regions.size() << " regions, " << filtered.set.regions.size()
              << " survive the filter\n";
    return 0;
}

struct MineArgs {
    std::string cluster_map;
    std::string weak;
    std::string out_dir = ".";
    int connectivity = 4;
    double q_small = 0.99;
    double q_large = 0.25;
    double positive_min = 0.80;
    double negative_max = 0.20;
    std::string polarity = "both";
};

int cmd_mine(const MineArgs& args) {
    const LabelMask cluster_map = load_mask(args.cluster_map);
    const LabelMask weak = load_mask(args.weak);
    const RegionSet all = extract_regions(cluster_map, args.connectivity);
    const FilterOutcome filtered = filter_regions(all, args.q_small, args.q_large);
    const MiningThresholds thresholds{args.positive_min, args.negative_max};
    const MinedLabels mined = restrict_polarity(
        mine_labels(filtered.set, weak, thresholds), polarity_from_name(args.polarity));
    // Mask sidecars carry no pixel size; report areas at the 4.7 m default.
    const MinedSummary summary = mined_summary(mined, filtered.set, 4.7);

    fs::create_directories(args.out_dir);
    write_text_file(join_path(args.out_dir, "mined.json"),
                    mined_to_json(mined, thresholds, summary));
    std::cout << mined.positives.size() << " positive / " << mined.negatives.size()
              << " negative regions mined, " << mined.discarded << " discarded\n";
    return 0;
}

struct ComposeArgs {
    std::string human;
    std::string cluster_map;
    std::string mined;
    std::string out = "extended";
    int connectivity = 4;
    double q_small = 0.99;
    double q_large = 0.25;
    std::string polarity = "both";
};

int cmd_compose(const ComposeArgs& args) {
    const LabelMask human = load_mask(args.human);
    const LabelMask cluster_map = load_mask(args.cluster_map);
    std::ifstream in(args.mined);
    if (!in) throw FormatError("missing mined-labels file: " + args.mined);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    MinedLabels mined = mined_from_json(text);
    mined = restrict_polarity(mined, polarity_from_name(args.polarity));

    // Region ids are stable across re-extraction of the same cluster map.
    const RegionSet all = extract_regions(cluster_map, args.connectivity);
    const FilterOutcome filtered = filter_regions(all, args.q_small, args.q_large);
    const LabelMask extended = compose_extended_mask(human, mined, filtered.set);
    save_mask(extended, args.out);
    std::cout << "extended mask written to " << args.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string imagery;
    std::string mask;
    std::string out = "segmodel.json";
    double learning_rate = 1e-3;
    int epochs = 50;
    int batch_size = 1024;
    int window_radius = 1;
    double l2 = 1e-4;
    std::uint64_t seed = 0;
    int threads = 1;
};

int cmd_train(const TrainArgs& args) {
    const Raster imagery = load_raster(args.imagery);
    const LabelMask mask = load_mask(args.mask);
    SegHyper hyper;
    hyper.learning_rate = args.learning_rate;
    hyper.epochs = args.epochs;
    hyper.batch_size = args.batch_size;
    hyper.window_radius = args.window_radius;
    hyper.l2 = args.l2;
    hyper.seed = args.seed;
    const SegModel model = train_segmenter(imagery, mask, hyper, args.threads);
    save_seg_model(model, args.out);
    std::cout << "trained; final loss " << model.epoch_loss.back() << "\n";
    return 0;
}

struct PredictArgs {
    std::string imagery;
    std::string model;
    std::string out = "predicted";
    int threads = 1;
};

int cmd_predict(const PredictArgs& args) {
    const Raster imagery = load_raster(args.imagery);
    const SegModel model = load_seg_model(args.model);
    const LabelMask predicted = predict_mask(imagery, model, args.threads);
    save_mask(predicted, args.out);
    std::cout << "prediction written to " << args.out << "\n";
    return 0;
}

struct EvalArgs {
    std::string pred;
    std::string reference;
    std::string out;
};

int cmd_eval(const EvalArgs& args) {
    const LabelMask pred = load_mask(args.pred);
    const LabelMask reference = load_mask(args.reference);
    const ConfusionCounts crop = confusion_counts(pred, reference, kCropland);
    const ConfusionCounts non_crop = confusion_counts(pred, reference, kNonCropland);
    const std::string text = metrics_to_json(crop, non_crop);
    if (args.out.empty())
        std::cout << text;
    else
        write_text_file(args.out, text);
    return 0;
}

// Defaults mirror the committed benchmark settings.
struct ScenariosArgs {
    std::string manifest;
    std::string out_dir = ".";
    int k = 10;
    std::size_t sample_size = 20000;
    int connectivity = 4;
    double q_small = 0.97;
    double q_large = 0.98;
    double positive_min = 0.80;
    double negative_max = 0.20;
    double learning_rate = 0.015;
    int epochs = 250;
    int batch_size = 256;
    int window_radius = 1;
    double l2 = 1e-4;
    int threads = 1;
};

int cmd_scenarios(const ScenariosArgs& args) {
    const auto [config, seed] = load_scene_manifest(args.manifest);
    const SceneBundle bundle = generate_scene(config, seed);

    ScenarioConfigs configs = benchmark_scenario_configs();
    configs.cluster.k = args.k;
    configs.cluster_sample_size = args.sample_size;
    configs.connectivity = args.connectivity;
    configs.q_small = args.q_small;
    configs.q_large = args.q_large;
    configs.thresholds = {args.positive_min, args.negative_max};
    configs.hyper.learning_rate = args.learning_rate;
    configs.hyper.epochs = args.epochs;
    configs.hyper.batch_size = args.batch_size;
    configs.hyper.window_radius = args.window_radius;
    configs.hyper.l2 = args.l2;
    configs.threads = args.threads;

    const ScenarioReport report = run_scenarios(bundle, configs, seed);
    fs::create_directories(args.out_dir);
    write_text_file(join_path(args.out_dir, "report.json"), report_to_json(report));
    const std::string table = report_to_table(report);
    write_text_file(join_path(args.out_dir, "report.txt"), table);
    std::cout << table;
    return 0;
}

struct RenderArgs {
    std::string mask;
    std::string raster;
    int band = 0;
    std::string out = "render.png";
    int k = 0;
};

int cmd_render(const RenderArgs& args) {
    if (!args.mask.empty()) {
        render_png(load_mask(args.mask), args.out, args.k);
    } else if (!args.raster.empty()) {
        render_band_png(load_raster(args.raster), args.band, args.out);
    } else {
        throw ConfigError("render needs --mask or --raster");
    }
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

struct RunArgs {
    std::string config_file;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    int threads = 0;
    std::string polarity;
};

int cmd_run(const RunArgs& args) {
    PipelineConfig config;
    if (!args.config_file.empty()) {
        config = load_pipeline_config(args.config_file);
    } else {
        config.scene = benchmark_scene_config();
    }
    // Flag > file > default.
    if (args.seed_set) config.seed = args.seed;
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.threads > 0) config.threads = args.threads;
    if (!args.polarity.empty()) config.polarity = polarity_from_name(args.polarity);
    run_pipeline(config);
    std::cout << "pipeline artifacts in " << config.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cropmine: cluster-based refinement of weak cropland labels"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    synth->add_option("--out", synth_args.out_dir, "output directory");
    synth->add_option("--seed", synth_args.seed, "scene seed");
    synth->add_option("--width", synth_args.width, "scene width in pixels");
    synth->add_option("--height", synth_args.height, "scene height in pixels");
    synth->add_option("--fields", synth_args.field_count, "crop field count");
    synth->add_option("--sites", synth_args.background_sites, "background Voronoi sites");
    synth->add_option("--polygons", synth_args.human_polygons, "human polygon count");
    synth->add_option("--coverage", synth_args.human_coverage, "human label coverage");
    synth->add_option("--crop-share", synth_args.human_crop_share,
                      "fraction of polygons aimed at cropland (negative = uniform)");
    synth->add_option("--jitter", synth_args.object_jitter, "per-object spectral jitter");
    synth->add_option("--shift-dx", synth_args.shift_dx, "weak-layer shift, columns");
    synth->add_option("--shift-dy", synth_args.shift_dy, "weak-layer shift, rows");
    synth->add_option("--dilation", synth_args.dilation, "weak-layer dilation radius");
    synth->add_option("--flip-rate", synth_args.flip_rate, "weak-layer flip rate");
    synth->add_flag("--render", synth_args.render, "also write PNG previews");

    ClusterArgs cluster_args;
    auto* cluster = app.add_subcommand("cluster", "fit k-means and assign clusters");
    cluster->add_option("--imagery", cluster_args.imagery,
                        "imagery path (repeat to pool a joint fitting sample)")
        ->required();
    cluster->add_option("--out", cluster_args.out_dir, "output directory");
    cluster->add_option("--k", cluster_args.k, "cluster count");
    cluster->add_option("--sample-size", cluster_args.sample_size, "fitting sample size");
    cluster->add_option("--seed", cluster_args.seed, "sampling/seeding seed");
    cluster->add_option("--tol", cluster_args.tol, "relative inertia tolerance");
    cluster->add_option("--max-iters", cluster_args.max_iters, "Lloyd iteration cap");
    cluster->add_flag("--no-standardize", cluster_args.no_standardize,
                      "skip per-band standardization");
    cluster->add_option("--threads", cluster_args.threads, "assignment threads");

    RegionsArgs regions_args;
    auto* regions = app.add_subcommand("regions", "extract and filter regions");
    regions->add_option("--cluster-map", regions_args.cluster_map, "cluster map path")
        ->required();
    regions->add_option("--out", regions_args.out_dir, "output directory");
    regions->add_option("--connectivity", regions_args.connectivity, "4 or 8");
    regions->add_option("--q-small", regions_args.q_small, "small-area quantile");
    regions->add_option("--q-large", regions_args.q_large, "large-area quantile");
    regions->add_flag("--mask", regions_args.write_mask, "write survivor mask");

    MineArgs mine_args;
    auto* mine = app.add_subcommand("mine", "mine labels from regions vs the weak layer");
    mine->add_option("--cluster-map", mine_args.cluster_map, "cluster map path")->required();
    mine->add_option("--weak", mine_args.weak, "weak mask path")->required();
    mine->add_option("--out", mine_args.out_dir, "output directory");
    mine->add_option("--connectivity", mine_args.connectivity, "4 or 8");
    mine->add_option("--q-small", mine_args.q_small, "small-area quantile");
    mine->add_option("--q-large", mine_args.q_large, "large-area quantile");
    mine->add_option("--positive-min", mine_args.positive_min, "positive threshold");
    mine->add_option("--negative-max", mine_args.negative_max, "negative threshold");
    mine->add_option("--polarity", mine_args.polarity, "both|positives|negatives");

    ComposeArgs compose_args;
    auto* compose = app.add_subcommand("compose", "compose the extended mask");
    compose->add_option("--human", compose_args.human, "sparse human mask")->required();
    compose->add_option("--cluster-map", compose_args.cluster_map, "cluster map path")
        ->required();
    compose->add_option("--mined", compose_args.mined, "mined.json path")->required();
    compose->add_option("--out", compose_args.out, "output mask path");
    compose->add_option("--connectivity", compose_args.connectivity, "4 or 8");
    compose->add_option("--q-small", compose_args.q_small, "small-area quantile");
    compose->add_option("--q-large", compose_args.q_large, "large-area quantile");
    compose->add_option("--polarity", compose_args.polarity, "both|positives|negatives");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train the per-pixel segmenter");
    train->add_option("--imagery", train_args.imagery, "imagery path")->required();
    train->add_option("--mask", train_args.mask, "training mask path")->required();
    train->add_option("--out", train_args.out, "model output path");
    train->add_option("--lr", train_args.learning_rate, "Adam learning rate");
    train->add_option("--epochs", train_args.epochs, "training epochs");
    train->add_option("--batch-size", train_args.batch_size, "mini-batch size");
    train->add_option("--window-radius", train_args.window_radius, "feature window radius");
    train->add_option("--l2", train_args.l2, "L2 penalty");
    train->add_option("--seed", train_args.seed, "shuffle seed");
    train->add_option("--threads", train_args.threads, "featurization threads");

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "predict a cropland mask");
    predict->add_option("--imagery", predict_args.imagery, "imagery path")->required();
    predict->add_option("--model", predict_args.model, "segmodel.json path")->required();
    predict->add_option("--out", predict_args.out, "output mask path");
    predict->add_option("--threads", predict_args.threads, "prediction threads");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "score a prediction against a reference");
    eval->add_option("--pred", eval_args.pred, "predicted mask path")->required();
    eval->add_option("--reference", eval_args.reference, "reference mask path")->required();
    eval->add_option("--out", eval_args.out, "metrics output path (default stdout)");

    ScenariosArgs scenarios_args;
    auto* scenarios = app.add_subcommand("scenarios", "run the seven label scenarios");
    scenarios->add_option("--manifest", scenarios_args.manifest, "scene_manifest.json path")
        ->required();
    scenarios->add_option("--out", scenarios_args.out_dir, "output directory");
    scenarios->add_option("--k", scenarios_args.k, "cluster count");
    scenarios->add_option("--sample-size", scenarios_args.sample_size, "fitting sample");
    scenarios->add_option("--connectivity", scenarios_args.connectivity, "4 or 8");
    scenarios->add_option("--q-small", scenarios_args.q_small, "small-area quantile");
    scenarios->add_option("--q-large", scenarios_args.q_large, "large-area quantile");
    scenarios->add_option("--positive-min", scenarios_args.positive_min, "positive threshold");
    scenarios->add_option("--negative-max", scenarios_args.negative_max, "negative threshold");
    scenarios->add_option("--lr", scenarios_args.learning_rate, "Adam learning rate");
    scenarios->add_option("--epochs", scenarios_args.epochs, "training epochs");
    scenarios->add_option("--batch-size", scenarios_args.batch_size, "mini-batch size");
    scenarios->add_option("--window-radius", scenarios_args.window_radius, "window radius");
    scenarios->add_option("--l2", scenarios_args.l2, "L2 penalty");
    scenarios->add_option("--threads", scenarios_args.threads, "worker threads");

    RenderArgs render_args;
    auto* render = app.add_subcommand("render", "render a layer to PNG");
    render->add_option("--mask", render_args.mask, "mask path");
    render->add_option("--raster", render_args.raster, "raster path");
    render->add_option("--band", render_args.band, "raster band to render");
    render->add_option("--out", render_args.out, "PNG output path");
    render->add_option("--k", render_args.k, "cluster count for the palette");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "run the full pipeline");
    run->add_option("--config", run_args.config_file, "pipeline config JSON");
    auto* seed_opt = run->add_option("--seed", run_args.seed, "global seed");
    run->add_option("--out", run_args.out_dir, "output directory");
    run->add_option("--threads", run_args.threads, "worker threads (1 = reference)");
    run->add_option("--polarity", run_args.polarity, "both|positives|negatives");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (cluster->parsed()) return cmd_cluster(cluster_args);
        if (regions->parsed()) return cmd_regions(regions_args);
        if (mine->parsed()) return cmd_mine(mine_args);
        if (compose->parsed()) return cmd_compose(compose_args);
        if (train->parsed()) return cmd_train(train_args);
        if (predict->parsed()) return cmd_predict(predict_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (scenarios->parsed()) return cmd_scenarios(scenarios_args);
        if (render->parsed()) return cmd_render(render_args);
        if (run->parsed()) {
            run_args.seed_set = seed_opt->count() > 0;
            return cmd_run(run_args);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
