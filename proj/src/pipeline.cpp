#include "cropmine/pipeline.hpp"

#include "cropmine/error.hpp"
#include "cropmine/png.hpp"
#include "cropmine/regions.hpp"
#include "cropmine/rng.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>

namespace cropmine {

using nlohmann::json;
namespace fs = std::filesystem;

void PipelineConfig::validate() const {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (out_dir.empty()) throw ConfigError("out_dir must be set");
    if (scene) {
        scene->validate();
    } else {
        if (imagery_path.empty() || weak_path.empty() || human_path.empty())
            throw ConfigError("either a scene config or imagery/weak/human paths "
                              "must be provided");
    }
    if (connectivity != 4 && connectivity != 8)
        throw ConfigError("connectivity must be 4 or 8");
    if (!(q_small > 0.0 && q_small <= 1.0) || !(q_large > 0.0 && q_large <= 1.0))
        throw ConfigError("filter quantiles must be in (0, 1]");
    thresholds.validate();
    hyper.validate();
    if (cluster_sample_size < 1) throw ConfigError("cluster_sample_size must be >= 1");
}

json pipeline_config_to_json(const PipelineConfig& config) {
    json j = {{"seed", config.seed},
              {"threads", config.threads},
              {"out_dir", config.out_dir},
              {"cluster",
               {{"k", config.cluster.k},
                {"max_iters", config.cluster.max_iters},
                {"tol", config.cluster.tol},
                {"sample_size", config.cluster_sample_size},
                {"standardize", config.standardize_bands}}},
              {"regions",
               {{"connectivity", config.connectivity},
                {"q_small", config.q_small},
                {"q_large", config.q_large}}},
              {"mining",
               {{"positive_min", config.thresholds.positive_min},
                {"negative_max", config.thresholds.negative_max},
                {"polarity", polarity_name(config.polarity)}}},
              {"segmenter",
               {{"learning_rate", config.hyper.learning_rate},
                {"beta1", config.hyper.beta1},
                {"beta2", config.hyper.beta2},
                {"epsilon", config.hyper.epsilon},
                {"epochs", config.hyper.epochs},
                {"batch_size", config.hyper.batch_size},
                {"window_radius", config.hyper.window_radius},
                {"l2", config.hyper.l2}}},
              {"render", config.render}};
    if (config.scene) {
        j["scene"] = scene_config_to_json(*config.scene);
    } else {
        j["inputs"] = {{"imagery", config.imagery_path},
                       {"weak", config.weak_path},
                       {"human", config.human_path}};
    }
    return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
    PipelineConfig config;
    try {
        config.seed = j.value("seed", config.seed);
        config.threads = j.value("threads", config.threads);
        config.out_dir = j.value("out_dir", config.out_dir);
        if (j.contains("scene"))
            config.scene = scene_config_from_json(j.at("scene"));
        if (j.contains("inputs")) {
            const auto& in = j.at("inputs");
            config.imagery_path = in.value("imagery", "");
            config.weak_path = in.value("weak", "");
            config.human_path = in.value("human", "");
        }
        if (j.contains("cluster")) {
            const auto& c = j.at("cluster");
            config.cluster.k = c.value("k", config.cluster.k);
            config.cluster.max_iters = c.value("max_iters", config.cluster.max_iters);
            config.cluster.tol = c.value("tol", config.cluster.tol);
            config.cluster_sample_size =
                c.value("sample_size", config.cluster_sample_size);
            config.standardize_bands = c.value("standardize", config.standardize_bands);
        }
        if (j.contains("regions")) {
            const auto& r = j.at("regions");
            config.connectivity = r.value("connectivity", config.connectivity);
            config.q_small = r.value("q_small", config.q_small);
            config.q_large = r.value("q_large", config.q_large);
        }
        if (j.contains("mining")) {
            const auto& m = j.at("mining");
            config.thresholds.positive_min =
                m.value("positive_min", config.thresholds.positive_min);
            config.thresholds.negative_max =
                m.value("negative_max", config.thresholds.negative_max);
            config.polarity = polarity_from_name(m.value("polarity", "both"));
        }
        if (j.contains("segmenter")) {
            const auto& s = j.at("segmenter");
            config.hyper.learning_rate =
                s.value("learning_rate", config.hyper.learning_rate);
            config.hyper.beta1 = s.value("beta1", config.hyper.beta1);
            config.hyper.beta2 = s.value("beta2", config.hyper.beta2);
            config.hyper.epsilon = s.value("epsilon", config.hyper.epsilon);
            config.hyper.epochs = s.value("epochs", config.hyper.epochs);
            config.hyper.batch_size = s.value("batch_size", config.hyper.batch_size);
            config.hyper.window_radius =
                s.value("window_radius", config.hyper.window_radius);
            config.hyper.l2 = s.value("l2", config.hyper.l2);
        }
        config.render = j.value("render", config.render);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad pipeline config: ") + e.what());
    }
    config.validate();
    return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config file ") + path + ": " + e.what());
    }
    return pipeline_config_from_json(j);
}

namespace {

class StageClock {
public:
    void start(const std::string& name) {
        current_ = name;
        begin_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto end = std::chrono::steady_clock::now();
        timings_[current_] =
            std::chrono::duration_cast<std::chrono::milliseconds>(end - begin_).count();
    }
    json to_json() const { return timings_; }

private:
    std::string current_;
    std::chrono::steady_clock::time_point begin_;
    std::map<std::string, long long> timings_;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << text;
}

} // namespace

void run_pipeline(const PipelineConfig& config) {
    config.validate();
    const fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    auto path_of = [&out_dir](const std::string& name) {
        return (out_dir / name).string();
    };

    StageClock clock;
    json artifacts = json::array();
    auto note = [&artifacts](const std::string& name) { artifacts.push_back(name); };
    auto guard = [](const std::string& stage, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const FormatError&) {
            throw; // data problems keep their identity (and exit code)
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage, e.what());
        }
    };

    // Inputs.
    Raster imagery;
    LabelMask weak, human;
    std::optional<LabelMask> truth;
    clock.start("inputs");
    guard("inputs", [&] {
        if (config.scene) {
            SceneBundle bundle = generate_scene(*config.scene, config.seed);
            imagery = std::move(bundle.imagery);
            weak = std::move(bundle.weak);
            human = std::move(bundle.human);
            truth = std::move(bundle.truth);
            save_raster(imagery, path_of("imagery"));
            save_mask(*truth, path_of("truth"));
            save_mask(weak, path_of("weak"));
            save_mask(human, path_of("human"));
            save_scene_manifest(*config.scene, config.seed, path_of("scene_manifest.json"));
            note("imagery.bin");
            note("truth.bin");
            note("weak.bin");
            note("human.bin");
            note("scene_manifest.json");
        } else {
            imagery = load_raster(config.imagery_path);
            weak = load_mask(config.weak_path);
            human = load_mask(config.human_path);
            if (weak.width != imagery.width || weak.height != imagery.height ||
                human.width != imagery.width || human.height != imagery.height)
                throw FormatError("input layer dimensions do not match the imagery");
        }
    });
    clock.stop();

    // Clustering.
    ClusterModel model;
    LabelMask cluster_map;
    clock.start("cluster");
    guard("cluster", [&] {
        const std::size_t n = std::min(config.cluster_sample_size, imagery.plane());
        FeatureMatrix sample =
            sample_pixels(imagery, n, sub_seed(config.seed, "cluster-sample"));
        FeatureMatrix std_sample;
        BandStats stats;
        if (config.standardize_bands) {
            std::tie(std_sample, stats) = standardize(sample);
        } else {
            std_sample = std::move(sample);
            stats = BandStats::identity(std_sample.cols);
        }
        ClusterConfig cluster_cfg = config.cluster;
        cluster_cfg.seed = sub_seed(config.seed, "kmeans");
        model = fit_kmeans(std_sample, stats, cluster_cfg);
        cluster_map = assign_clusters(imagery, model, config.threads);
        save_cluster_model(model, path_of("model.json"));
        save_mask(cluster_map, path_of("cluster_map"), model.k);
        note("model.json");
        note("cluster_map.bin");
    });
    clock.stop();

    // Regions.
    RegionSet all_regions;
    FilterOutcome filtered;
    clock.start("regions");
    guard("regions", [&] {
        all_regions = extract_regions(cluster_map, config.connectivity);
        filtered = filter_regions(all_regions, config.q_small, config.q_large);
        write_text(path_of("regions.json"),
                   region_set_to_json(filtered.set, all_regions.regions.size()));
        save_mask(region_presence_mask(filtered.set), path_of("filtered_regions"));
        note("regions.json");
        note("filtered_regions.bin");
    });
    clock.stop();

    // Mining.
    MinedLabels mined;
    clock.start("mine");
    guard("mine", [&] {
        mined = mine_labels(filtered.set, weak, config.thresholds);
        const MinedSummary summary =
            mined_summary(mined, filtered.set, imagery.pixel_size_m);
        write_text(path_of("mined.json"),
                   mined_to_json(mined, config.thresholds, summary));
        note("mined.json");
    });
    clock.stop();

    // Composition.
    LabelMask extended;
    clock.start("compose");
    guard("compose", [&] {
        extended = compose_extended_mask(
            human, restrict_polarity(mined, config.polarity), filtered.set);
        save_mask(extended, path_of("extended"));
        note("extended.bin");
    });
    clock.stop();

    // Training.
    SegModel seg;
    clock.start("train");
    guard("train", [&] {
        SegHyper hyper = config.hyper;
        hyper.seed = sub_seed(config.seed, "train");
        seg = train_segmenter(imagery, extended, hyper, config.threads);
        save_seg_model(seg, path_of("segmodel.json"));
        note("segmodel.json");
    });
    clock.stop();

    // Prediction.
    LabelMask predicted;
    clock.start("predict");
    guard("predict", [&] {
        predicted = predict_mask(imagery, seg, config.threads);
        save_mask(predicted, path_of("predicted"));
        note("predicted.bin");
    });
    clock.stop();

    // Evaluation against truth when available, else the sparse human mask.
    clock.start("eval");
    guard("eval", [&] {
        const LabelMask& reference = truth ? *truth : human;
        const ConfusionCounts crop = confusion_counts(predicted, reference, kCropland);
        const ConfusionCounts non_crop =
            confusion_counts(predicted, reference, kNonCropland);
        write_text(path_of("metrics.json"), metrics_to_json(crop, non_crop));
        note("metrics.json");
    });
    clock.stop();

    if (config.render) {
        clock.start("render");
        guard("render", [&] {
            render_png(cluster_map, path_of("cluster_map.png"), model.k);
            render_png(extended, path_of("extended.png"));
            render_png(predicted, path_of("predicted.png"));
            if (truth) render_png(*truth, path_of("truth.png"));
            note("cluster_map.png");
            note("extended.png");
            note("predicted.png");
        });
        clock.stop();
    }

    // The config echo drops out_dir: it names where the tree lives, not what
    // was computed, so identical runs into different directories still
    // produce identical manifests (timings aside).
    json config_echo = pipeline_config_to_json(config);
    config_echo.erase("out_dir");
    json manifest = {{"version", kVersion},
                     {"config", config_echo},
                     {"seed", config.seed},
                     {"stage_seeds",
                      {{"cluster-sample", sub_seed(config.seed, "cluster-sample")},
                       {"kmeans", sub_seed(config.seed, "kmeans")},
                       {"train", sub_seed(config.seed, "train")}}},
                     {"artifacts", artifacts},
                     {"timings_ms", clock.to_json()}};
    write_text(path_of("run_manifest.json"), manifest.dump(2) + "\n");
}

} // namespace cropmine
