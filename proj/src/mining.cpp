#include "cropmine/mining.hpp"

#include "cropmine/error.hpp"

#include <json.hpp>

#include <unordered_map>

namespace cropmine {

using nlohmann::json;

void MiningThresholds::validate() const {
    if (!(negative_max >= 0.0 && negative_max < positive_min && positive_min <= 1.0))
        throw ConfigError("mining thresholds need 0 <= negative_max < positive_min <= 1");
}

Polarity polarity_from_name(const std::string& name) {
    if (name == "both") return Polarity::Both;
    if (name == "positives") return Polarity::PositivesOnly;
    if (name == "negatives") return Polarity::NegativesOnly;
    throw ConfigError("polarity must be one of both|positives|negatives");
}

const char* polarity_name(Polarity polarity) {
    switch (polarity) {
    case Polarity::Both: return "both";
    case Polarity::PositivesOnly: return "positives";
    case Polarity::NegativesOnly: return "negatives";
    }
    return "both";
}

double intersection_fraction(const Region& region, const LabelMask& weak) {
    if (region.pixels.empty())
        throw ConfigError("intersection_fraction of an empty region");
    std::size_t covered = 0;
    for (std::uint32_t px : region.pixels) {
        if (px >= weak.size())
            throw ConfigError("region pixel outside the weak mask");
        if (weak.data[px] == kCropland) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(region.area_px);
}

MinedLabels mine_labels(const RegionSet& regions, const LabelMask& weak,
                        const MiningThresholds& thresholds) {
    thresholds.validate();
    if (weak.width != regions.width || weak.height != regions.height)
        throw ConfigError("weak mask dimensions do not match the region set");

    MinedLabels mined;
    for (const auto& region : regions.regions) {
        const double fraction = intersection_fraction(region, weak);
        if (fraction > thresholds.positive_min)
            mined.positives.push_back({region.id, fraction});
        else if (fraction < thresholds.negative_max)
            mined.negatives.push_back({region.id, fraction});
        else
            ++mined.discarded;
    }
    return mined;
}

MinedLabels restrict_polarity(const MinedLabels& mined, Polarity polarity) {
    MinedLabels out = mined;
    if (polarity == Polarity::PositivesOnly) out.negatives.clear();
    if (polarity == Polarity::NegativesOnly) out.positives.clear();
    return out;
}

LabelMask compose_extended_mask(const LabelMask& human, const MinedLabels& mined,
                                const RegionSet& regions) {
    if (human.width != regions.width || human.height != regions.height)
        throw ConfigError("human mask dimensions do not match the region set");

    std::unordered_map<int, const Region*> by_id;
    by_id.reserve(regions.regions.size());
    for (const auto& region : regions.regions) by_id[region.id] = &region;
    auto region_of = [&by_id](int id) -> const Region& {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw ConfigError("mined region id " + std::to_string(id) +
                              " not present in the region set");
        return *it->second;
    };

    LabelMask extended = make_mask(human.width, human.height, MaskKind::Extended);
    // Lowest precedence first, human last so it always wins.
    for (const auto& entry : mined.negatives)
        for (std::uint32_t px : region_of(entry.region_id).pixels)
            extended.data[px] = kNonCropland;
    for (const auto& entry : mined.positives)
        for (std::uint32_t px : region_of(entry.region_id).pixels)
            extended.data[px] = kCropland;
    for (std::size_t i = 0; i < human.size(); ++i)
        if (human.data[i] != kUnknown) extended.data[i] = human.data[i];
    return extended;
}

MinedSummary mined_summary(const MinedLabels& mined, const RegionSet& regions,
                           double pixel_size_m) {
    std::unordered_map<int, std::size_t> area_by_id;
    area_by_id.reserve(regions.regions.size());
    for (const auto& region : regions.regions) area_by_id[region.id] = region.area_px;
    auto area_of = [&area_by_id](int id) {
        auto it = area_by_id.find(id);
        if (it == area_by_id.end())
            throw ConfigError("mined region id " + std::to_string(id) +
                              " not present in the region set");
        return it->second;
    };

    MinedSummary summary;
    summary.positive_count = mined.positives.size();
    summary.negative_count = mined.negatives.size();
    for (const auto& entry : mined.positives) summary.positive_px += area_of(entry.region_id);
    for (const auto& entry : mined.negatives) summary.negative_px += area_of(entry.region_id);
    const double km2_per_px = pixel_size_m * pixel_size_m / 1e6;
    summary.positive_km2 = static_cast<double>(summary.positive_px) * km2_per_px;
    summary.negative_km2 = static_cast<double>(summary.negative_px) * km2_per_px;
    return summary;
}

std::string mined_to_json(const MinedLabels& mined, const MiningThresholds& thresholds,
                          const MinedSummary& summary) {
    auto polarity_list = [](const std::vector<MinedRegion>& entries) {
        json list = json::array();
        for (const auto& entry : entries)
            list.push_back({{"id", entry.region_id}, {"fraction", entry.fraction}});
        return list;
    };
    json j = {{"thresholds",
               {{"positive_min", thresholds.positive_min},
                {"negative_max", thresholds.negative_max}}},
              {"positives", polarity_list(mined.positives)},
              {"negatives", polarity_list(mined.negatives)},
              {"discarded", mined.discarded},
              {"summary",
               {{"positive", {{"count", summary.positive_count},
                              {"area_px", summary.positive_px},
                              {"area_km2", summary.positive_km2}}},
                {"negative", {{"count", summary.negative_count},
                              {"area_px", summary.negative_px},
                              {"area_km2", summary.negative_km2}}}}}};
    return j.dump(2) + "\n";
}

MinedLabels mined_from_json(const std::string& text) {
    MinedLabels mined;
    try {
        const json j = json::parse(text);
        for (const auto& entry : j.at("positives"))
            mined.positives.push_back(
                {entry.at("id").get<int>(), entry.at("fraction").get<double>()});
        for (const auto& entry : j.at("negatives"))
            mined.negatives.push_back(
                {entry.at("id").get<int>(), entry.at("fraction").get<double>()});
        mined.discarded = j.at("discarded").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad mined-labels file: ") + e.what());
    }
    return mined;
}

} // namespace cropmine
