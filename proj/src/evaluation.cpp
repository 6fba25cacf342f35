#include "cropmine/evaluation.hpp"

#include "cropmine/error.hpp"
#include "cropmine/regions.hpp"
#include "cropmine/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace cropmine {

using nlohmann::json;

ConfusionCounts confusion_counts(const LabelMask& pred, const LabelMask& reference,
                                 std::uint8_t positive) {
    if (pred.width != reference.width || pred.height != reference.height)
        throw ConfigError("prediction and reference dimensions differ");
    ConfusionCounts counts;
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const std::uint8_t ref = reference.data[i];
        if (ref == kUnknown) continue;
        ++evaluated;
        const bool ref_pos = ref == positive;
        const bool pred_pos = pred.data[i] == positive;
        if (ref_pos && pred_pos) ++counts.tp;
        else if (!ref_pos && pred_pos) ++counts.fp;
        else if (ref_pos && !pred_pos) ++counts.fn;
        else ++counts.tn;
    }
    if (evaluated == 0)
        throw ConfigError("reference mask has no known pixels to evaluate");
    return counts;
}

Metrics precision_recall_f1(const ConfusionCounts& counts) {
    Metrics m;
    const double tp = static_cast<double>(counts.tp);
    m.precision = counts.tp + counts.fp == 0
                      ? 0.0
                      : tp / static_cast<double>(counts.tp + counts.fp);
    m.recall = counts.tp + counts.fn == 0
                   ? 0.0
                   : tp / static_cast<double>(counts.tp + counts.fn);
    m.f1 = m.precision + m.recall == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

LabelMask half_human_mask(const LabelMask& human,
                          const std::vector<HumanPolygon>& polygons,
                          std::uint64_t seed) {
    std::vector<std::size_t> order(polygons.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(polygons.size() / 2);

    LabelMask half = make_mask(human.width, human.height, MaskKind::SparseHuman);
    for (std::size_t idx : order) {
        const HumanPolygon& poly = polygons[idx];
        for (int r = poly.row; r < poly.row + poly.height; ++r)
            for (int c = poly.col; c < poly.col + poly.width; ++c)
                half.at(r, c) = poly.category;
    }
    return half;
}

LabelMask overlay_weak_positives(const LabelMask& base, const LabelMask& weak) {
    if (base.width != weak.width || base.height != weak.height)
        throw ConfigError("mask dimensions differ");
    LabelMask out = base;
    out.kind = MaskKind::Extended;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out.data[i] == kUnknown && weak.data[i] == kCropland)
            out.data[i] = kCropland;
    return out;
}

const ScenarioResult& ScenarioReport::row(const std::string& name) const {
    for (const auto& r : rows)
        if (r.name == name) return r;
    throw ConfigError("no scenario named '" + name + "' in the report");
}

ScenarioReport run_scenarios(const SceneBundle& bundle,
                             const ScenarioConfigs& configs, std::uint64_t seed) {
    // Shared mining pipeline: cluster, regions, filter, score.
    const std::size_t sample_n =
        std::min(configs.cluster_sample_size, bundle.imagery.plane());
    FeatureMatrix sample =
        sample_pixels(bundle.imagery, sample_n, sub_seed(seed, "cluster-sample"));

    FeatureMatrix std_sample;
    BandStats stats;
    if (configs.standardize_bands) {
        std::tie(std_sample, stats) = standardize(sample);
    } else {
        std_sample = std::move(sample);
        stats = BandStats::identity(std_sample.cols);
    }

    ClusterConfig cluster_cfg = configs.cluster;
    cluster_cfg.seed = sub_seed(seed, "kmeans");
    const ClusterModel model = fit_kmeans(std_sample, stats, cluster_cfg);
    const LabelMask cluster_map =
        assign_clusters(bundle.imagery, model, configs.threads);

    const RegionSet all_regions = extract_regions(cluster_map, configs.connectivity);
    const FilterOutcome filtered =
        filter_regions(all_regions, configs.q_small, configs.q_large);
    const MinedLabels mined =
        mine_labels(filtered.set, bundle.weak, configs.thresholds);
    const MinedSummary summary =
        mined_summary(mined, filtered.set, bundle.imagery.pixel_size_m);

    const LabelMask half =
        half_human_mask(bundle.human, bundle.human_polygons, sub_seed(seed, "halving"));

    struct Scenario {
        std::string name;
        std::string display;
        LabelMask mask;
        bool count_positives;
        bool count_negatives;
    };
    std::vector<Scenario> scenarios;
    scenarios.push_back({"human", "Human labels", bundle.human, false, false});
    scenarios.push_back({"half_human", "Half human labels", half, false, false});
    scenarios.push_back({"half_human_all_mined", "Half human labels + all mined labels",
                         compose_extended_mask(half, mined, filtered.set), true, true});
    scenarios.push_back(
        {"half_human_mined_negative", "Half human labels + mined negative labels",
         compose_extended_mask(half, restrict_polarity(mined, Polarity::NegativesOnly),
                               filtered.set),
         false, true});
    scenarios.push_back(
        {"half_human_mined_positive", "Half human labels + mined positive labels",
         compose_extended_mask(half, restrict_polarity(mined, Polarity::PositivesOnly),
                               filtered.set),
         true, false});
    scenarios.push_back({"half_human_weak", "Half human labels + weak labels",
                         overlay_weak_positives(half, bundle.weak), false, false});
    scenarios.push_back(
        {"half_human_weak_mined_negative",
         "Half human labels + weak labels + mined negative labels",
         overlay_weak_positives(
             compose_extended_mask(half, restrict_polarity(mined, Polarity::NegativesOnly),
                                   filtered.set),
             bundle.weak),
         false, true});

    const FeatureMatrix raw_features = compute_features(
        bundle.imagery, configs.hyper.window_radius, configs.threads);

    ScenarioReport report;
    for (auto& scenario : scenarios) {
        SegHyper hyper = configs.hyper;
        hyper.seed = sub_seed(seed, ("train:" + scenario.name).c_str());
        SegModel seg;
        try {
            seg = train_segmenter_with_features(raw_features, bundle.imagery,
                                                scenario.mask, hyper);
        } catch (const StageError& e) {
            throw StageError("scenarios",
                             "scenario '" + scenario.name + "': " + e.what());
        }
        const LabelMask pred = predict_mask_with_features(
            raw_features, bundle.imagery, seg, configs.threads);

        ScenarioResult result;
        result.name = scenario.name;
        result.display = scenario.display;
        result.has_mined = scenario.count_positives || scenario.count_negatives;
        if (scenario.count_positives) {
            result.mined_positive_count = summary.positive_count;
            result.mined_positive_km2 = summary.positive_km2;
        }
        if (scenario.count_negatives) {
            result.mined_negative_count = summary.negative_count;
            result.mined_negative_km2 = summary.negative_km2;
        }
        result.cropland =
            precision_recall_f1(confusion_counts(pred, bundle.truth, kCropland));
        result.non_cropland =
            precision_recall_f1(confusion_counts(pred, bundle.truth, kNonCropland));
        report.rows.push_back(std::move(result));
    }
    return report;
}

std::string report_to_json(const ScenarioReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"name", r.name},
                        {"display", r.display},
                        {"has_mined", r.has_mined},
                        {"mined_positive_count", r.mined_positive_count},
                        {"mined_negative_count", r.mined_negative_count},
                        {"mined_positive_km2", r.mined_positive_km2},
                        {"mined_negative_km2", r.mined_negative_km2},
                        {"cropland",
                         {{"precision", r.cropland.precision},
                          {"recall", r.cropland.recall},
                          {"f1", r.cropland.f1}}},
                        {"non_cropland",
                         {{"precision", r.non_cropland.precision},
                          {"recall", r.non_cropland.recall},
                          {"f1", r.non_cropland.f1}}}});
    }
    return json{{"scenarios", rows}}.dump(2) + "\n";
}

std::string report_to_table(const ScenarioReport& report) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-56s %-4s %10s %12s %9s %10s %7s\n",
                  "Scenario", "Lbl", "Mined (#)", "Mined (km2)", "F1", "Precision",
                  "Recall");
    out << line;
    out << std::string(113, '-') << "\n";
    for (const auto& r : report.rows) {
        auto fmt_count = [&](bool present, std::size_t count) {
            return present ? std::to_string(count) : std::string("-");
        };
        auto fmt_area = [&](bool present, double km2) {
            if (!present) return std::string("-");
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", km2);
            return std::string(buf);
        };
        std::snprintf(line, sizeof(line), "%-56s %-4s %10s %12s %9.2f %10.2f %7.2f\n",
                      r.display.c_str(), "C",
                      fmt_count(r.has_mined, r.mined_positive_count).c_str(),
                      fmt_area(r.has_mined, r.mined_positive_km2).c_str(),
                      r.cropland.f1, r.cropland.precision, r.cropland.recall);
        out << line;
        std::snprintf(line, sizeof(line), "%-56s %-4s %10s %12s %9.2f %10.2f %7.2f\n",
                      "", "NC", fmt_count(r.has_mined, r.mined_negative_count).c_str(),
                      fmt_area(r.has_mined, r.mined_negative_km2).c_str(),
                      r.non_cropland.f1, r.non_cropland.precision,
                      r.non_cropland.recall);
        out << line;
    }
    return out.str();
}

std::string metrics_to_json(const ConfusionCounts& crop, const ConfusionCounts& non_crop) {
    auto block = [](const ConfusionCounts& c) {
        const Metrics m = precision_recall_f1(c);
        return json{{"tp", c.tp},      {"fp", c.fp},          {"fn", c.fn},
                    {"tn", c.tn},      {"precision", m.precision},
                    {"recall", m.recall}, {"f1", m.f1}};
    };
    json j = {{"cropland", block(crop)}, {"non_cropland", block(non_crop)}};
    return j.dump(2) + "\n";
}

} // namespace cropmine
