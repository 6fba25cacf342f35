#pragma once

#include "cropmine/clustering.hpp"
#include "cropmine/evaluation.hpp"
#include "cropmine/mining.hpp"
#include "cropmine/segmenter.hpp"
#include "cropmine/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace cropmine {

inline constexpr const char* kVersion = "0.1.0";

/// Inputs come either from a synthetic scene or from files on disk.
struct PipelineConfig {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = "out";

    std::optional<SceneConfig> scene;
    std::string imagery_path;
    std::string weak_path;
    std::string human_path;

    ClusterConfig cluster;
    std::size_t cluster_sample_size = 20000;
    bool standardize_bands = true;

    int connectivity = 4;
    double q_small = 0.99;
    double q_large = 0.25;

    MiningThresholds thresholds;
    Polarity polarity = Polarity::Both;

    SegHyper hyper;

    bool render = false;

    void validate() const;
};

nlohmann::json pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::string& path);

/// Full pipeline: cluster -> regions -> mine -> compose -> train -> predict
/// -> eval, writing every intermediate artifact plus run_manifest.json under
/// config.out_dir. Any stage error aborts with the stage name; artifacts
/// written so far are kept.
void run_pipeline(const PipelineConfig& config);

} // namespace cropmine
