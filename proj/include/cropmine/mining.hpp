#pragma once

#include "cropmine/raster.hpp"
#include "cropmine/regions.hpp"

#include <string>
#include <vector>

namespace cropmine {

/// Strict intersection-fraction thresholds: a region becomes a positive
/// (cropland) label when its fraction exceeds positive_min and a negative
/// when it falls below negative_max. Everything in between is discarded.
struct MiningThresholds {
    double positive_min = 0.80;
    double negative_max = 0.20;

    void validate() const;
};

struct MinedRegion {
    int region_id = 0;
    double fraction = 0.0;
};

struct MinedLabels {
    std::vector<MinedRegion> positives;
    std::vector<MinedRegion> negatives;
    std::size_t discarded = 0;
};

enum class Polarity { Both, PositivesOnly, NegativesOnly };

Polarity polarity_from_name(const std::string& name);
const char* polarity_name(Polarity polarity);

/// Share of the region's pixels covered by the weak cropland class.
double intersection_fraction(const Region& region, const LabelMask& weak);

/// Score every region of the (filtered) set against the weak layer and split
/// by the strict thresholds.
MinedLabels mine_labels(const RegionSet& regions, const LabelMask& weak,
                        const MiningThresholds& thresholds);

/// Drop one polarity from a mined set (for the scenario matrix).
MinedLabels restrict_polarity(const MinedLabels& mined, Polarity polarity);

/// Pixel precedence: human label if known, else mined-positive cropland,
/// else mined-negative non-cropland, else unknown.
LabelMask compose_extended_mask(const LabelMask& human, const MinedLabels& mined,
                                const RegionSet& regions);

struct MinedSummary {
    std::size_t positive_count = 0;
    std::size_t negative_count = 0;
    std::size_t positive_px = 0;
    std::size_t negative_px = 0;
    double positive_km2 = 0.0;
    double negative_km2 = 0.0;
};

MinedSummary mined_summary(const MinedLabels& mined, const RegionSet& regions,
                           double pixel_size_m);

std::string mined_to_json(const MinedLabels& mined, const MiningThresholds& thresholds,
                          const MinedSummary& summary);
MinedLabels mined_from_json(const std::string& text);

} // namespace cropmine
