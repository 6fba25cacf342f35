#include "cropmine/regions.hpp"

#include "cropmine/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace cropmine {

RegionSet extract_regions(const LabelMask& cluster_map, int connectivity) {
    if (connectivity != 4 && connectivity != 8)
        throw ConfigError("connectivity must be 4 or 8");
    cluster_map.validate(0);

    const int w = cluster_map.width;
    const int h = cluster_map.height;
    RegionSet set;
    set.connectivity = connectivity;
    set.width = w;
    set.height = h;

    std::vector<bool> visited(cluster_map.size(), false);
    std::vector<std::uint32_t> stack;

    for (std::uint32_t start = 0; start < cluster_map.size(); ++start) {
        if (visited[start]) continue;
        const std::uint8_t code = cluster_map.data[start];

        Region region;
        region.id = static_cast<int>(set.regions.size());
        region.cluster = code;
        region.min_row = region.max_row = static_cast<int>(start) / w;
        region.min_col = region.max_col = static_cast<int>(start) % w;

        visited[start] = true;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::uint32_t px = stack.back();
            stack.pop_back();
            region.pixels.push_back(px);
            const int row = static_cast<int>(px) / w;
            const int col = static_cast<int>(px) % w;
            region.min_row = std::min(region.min_row, row);
            region.max_row = std::max(region.max_row, row);
            region.min_col = std::min(region.min_col, col);
            region.max_col = std::max(region.max_col, col);

            auto try_push = [&](int r, int c) {
                if (r < 0 || r >= h || c < 0 || c >= w) return;
                const auto idx = static_cast<std::uint32_t>(r * w + c);
                if (visited[idx] || cluster_map.data[idx] != code) return;
                visited[idx] = true;
                stack.push_back(idx);
            };
            try_push(row - 1, col);
            try_push(row + 1, col);
            try_push(row, col - 1);
            try_push(row, col + 1);
            if (connectivity == 8) {
                try_push(row - 1, col - 1);
                try_push(row - 1, col + 1);
                try_push(row + 1, col - 1);
                try_push(row + 1, col + 1);
            }
        }
        std::sort(region.pixels.begin(), region.pixels.end());
        region.area_px = region.pixels.size();
        set.regions.push_back(std::move(region));
    }
    return set;
}

std::size_t area_quantile(const RegionSet& set, double q) {
    if (set.regions.empty())
        throw ConfigError("area_quantile of an empty region set");
    if (!(q > 0.0) || q > 1.0)
        throw ConfigError("quantile fraction must be in (0, 1]");
    std::vector<std::size_t> areas;
    areas.reserve(set.regions.size());
    for (const auto& region : set.regions) areas.push_back(region.area_px);
    std::sort(areas.begin(), areas.end());
    // Nearest rank, guarded against q*n landing a hair above an integer.
    const double n = static_cast<double>(areas.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::max<std::size_t>(rank, 1);
    return areas[rank - 1];
}

FilterOutcome filter_regions(const RegionSet& set, double q_small, double q_large) {
    if (set.regions.empty())
        throw ConfigError("filter_regions on an empty region set");

    const std::size_t small_cut = area_quantile(set, q_small);
    FilterOutcome outcome;
    outcome.set.connectivity = set.connectivity;
    outcome.set.width = set.width;
    outcome.set.height = set.height;

    RegionSet survivors = outcome.set;
    for (const auto& region : set.regions)
        if (region.area_px >= small_cut) survivors.regions.push_back(region);

    if (survivors.regions.empty()) {
        // Cannot happen with nearest-rank thresholds (the max always
        // survives), but keep the warning path total.
        outcome.all_removed = true;
        return outcome;
    }

    const std::size_t large_cut = area_quantile(survivors, q_large);
    for (auto& region : survivors.regions)
        if (region.area_px <= large_cut)
            outcome.set.regions.push_back(std::move(region));

    outcome.all_removed = outcome.set.regions.empty();
    return outcome;
}

LabelMask region_presence_mask(const RegionSet& set) {
    LabelMask mask = make_mask(set.width, set.height, MaskKind::Extended, kUnknown);
    for (const auto& region : set.regions)
        for (std::uint32_t px : region.pixels) mask.data[px] = kCropland;
    return mask;
}

std::string region_set_to_json(const RegionSet& set, std::size_t total_before_filter) {
    nlohmann::json j;
    j["connectivity"] = set.connectivity;
    j["width"] = set.width;
    j["height"] = set.height;
    j["total_before_filter"] = total_before_filter;
    auto& list = j["regions"] = nlohmann::json::array();
    for (const auto& region : set.regions) {
        list.push_back({{"id", region.id},
                        {"cluster", region.cluster},
                        {"area_px", region.area_px},
                        {"bbox", {region.min_row, region.min_col, region.max_row,
                                  region.max_col}}});
    }
    return j.dump(2) + "\n";
}

} // namespace cropmine
