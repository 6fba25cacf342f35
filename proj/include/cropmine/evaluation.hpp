#pragma once

#include "cropmine/clustering.hpp"
#include "cropmine/mining.hpp"
#include "cropmine/raster.hpp"
#include "cropmine/segmenter.hpp"
#include "cropmine/synth.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cropmine {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Pixel-wise counts against the reference, restricted to reference pixels
/// that are not unknown. positive is the category counted as positive.
ConfusionCounts confusion_counts(const LabelMask& pred, const LabelMask& reference,
                                 std::uint8_t positive);

/// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 their harmonic mean;
/// every 0/0 is 0 by convention.
Metrics precision_recall_f1(const ConfusionCounts& counts);

/// Everything the scenario matrix needs beyond the scene itself.
struct ScenarioConfigs {
    ClusterConfig cluster;
    std::size_t cluster_sample_size = 20000;
    bool standardize_bands = true;
    int connectivity = 4;
    double q_small = 0.99;
    double q_large = 0.25;
    MiningThresholds thresholds;
    SegHyper hyper;
    int threads = 1;
};

struct ScenarioResult {
    std::string name;
    std::string display;
    bool has_mined = false;
    std::size_t mined_positive_count = 0;
    std::size_t mined_negative_count = 0;
    double mined_positive_km2 = 0.0;
    double mined_negative_km2 = 0.0;
    Metrics cropland;
    Metrics non_cropland;
};

struct ScenarioReport {
    std::vector<ScenarioResult> rows;

    const ScenarioResult& row(const std::string& name) const;
};

/// Execute the seven label scenarios on one scene: full human labels, a
/// seeded random half of the human polygons, the half set plus mined labels
/// (all / negatives / positives), the half set plus the raw weak layer as
/// cropland-positive pixels, and the half set plus weak plus mined
/// negatives. Each trains the segmenter, predicts on the same imagery and
/// scores both categories against the total truth layer.
ScenarioReport run_scenarios(const SceneBundle& bundle,
                             const ScenarioConfigs& configs, std::uint64_t seed);

/// Half of the human polygon list, chosen by a seeded shuffle, rasterized.
LabelMask half_human_mask(const LabelMask& human,
                          const std::vector<HumanPolygon>& polygons,
                          std::uint64_t seed);

/// Weak cropland pixels become cropland training labels wherever the mask is
/// still unknown; everything else keeps its prior value.
LabelMask overlay_weak_positives(const LabelMask& base, const LabelMask& weak);

std::string report_to_json(const ScenarioReport& report);
std::string report_to_table(const ScenarioReport& report);

std::string metrics_to_json(const ConfusionCounts& crop, const ConfusionCounts& non_crop);

} // namespace cropmine
