#pragma once

#include "cropmine/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cropmine {

/// Contiguous group of same-cluster pixels. Pixels are stored as row-major
/// grid indices (row * width + col) in ascending order.
struct Region {
    int id = 0;
    std::uint8_t cluster = 0;
    std::vector<std::uint32_t> pixels;
    std::size_t area_px = 0;
    int min_row = 0, min_col = 0, max_row = 0, max_col = 0;
};

struct RegionSet {
    std::vector<Region> regions;
    int connectivity = 4;
    int width = 0;
    int height = 0;
};

struct FilterOutcome {
    RegionSet set;
    bool all_removed = false; // warning indicator, not an error
};

/// Maximal connected components of equal-code pixels, enumerated in
/// row-major order of each component's first pixel. connectivity is 4 or 8.
RegionSet extract_regions(const LabelMask& cluster_map, int connectivity = 4);

/// Nearest-rank quantile of the region-area distribution: the ceil(q*n)-th
/// smallest area, 1-based, q in (0, 1].
std::size_t area_quantile(const RegionSet& set, double q);

/// Sequential area filter: drop regions with area below the q_small quantile
/// of all areas, then drop survivors with area above the q_large quantile of
/// the survivor areas. Regions exactly at a threshold survive. Ordering of
/// survivors is preserved and ids stay those assigned at extraction.
FilterOutcome filter_regions(const RegionSet& set, double q_small = 0.99,
                             double q_large = 0.25);

/// Survivor pixels -> cropland code, everything else unknown. For rendering.
LabelMask region_presence_mask(const RegionSet& set);

std::string region_set_to_json(const RegionSet& set, std::size_t total_before_filter);

} // namespace cropmine
