#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cropmine/error.hpp"
#include "cropmine/mining.hpp"
#include "cropmine/rng.hpp"

#include <cmath>

using namespace cropmine;

namespace {

// One region per row with the requested number of weak-cropland pixels.
struct Fixture {
    RegionSet regions;
    LabelMask weak;
};

Fixture fixture_of(const std::vector<std::pair<std::size_t, std::size_t>>& rows) {
    // rows: (area, weak-crop pixels within the region)
    Fixture fx;
    std::size_t width = 0;
    for (const auto& [area, covered] : rows) width = std::max(width, area);
    fx.regions.width = static_cast<int>(width);
    fx.regions.height = static_cast<int>(rows.size());
    fx.regions.connectivity = 4;
    fx.weak = make_mask(fx.regions.width, fx.regions.height, MaskKind::Weak,
                        kNonCropland);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto [area, covered] = rows[i];
        Region region;
        region.id = static_cast<int>(i);
        for (std::size_t c = 0; c < area; ++c) {
            const auto px = static_cast<std::uint32_t>(i * width + c);
            region.pixels.push_back(px);
            if (c < covered) fx.weak.data[px] = kCropland;
        }
        region.area_px = area;
        fx.regions.regions.push_back(std::move(region));
    }
    return fx;
}

} // namespace

TEST_CASE("intersection fraction endpoints") {
    const Fixture all = fixture_of({{10, 10}});
    CHECK(intersection_fraction(all.regions.regions[0], all.weak) == 1.0);
    const Fixture none = fixture_of({{10, 0}});
    CHECK(intersection_fraction(none.regions.regions[0], none.weak) == 0.0);
}

TEST_CASE("8 of 10 pixels is exactly 0.8 and is not mined positive") {
    const Fixture fx = fixture_of({{10, 8}});
    CHECK(intersection_fraction(fx.regions.regions[0], fx.weak) == 0.8);
    const MinedLabels mined = mine_labels(fx.regions, fx.weak, {});
    CHECK(mined.positives.empty());
    CHECK(mined.negatives.empty());
    CHECK(mined.discarded == 1);
}

TEST_CASE("fractions 0.9 / 0.5 / 0.1 split into positive, discard, negative") {
    const Fixture fx = fixture_of({{10, 9}, {10, 5}, {10, 1}});
    const MinedLabels mined = mine_labels(fx.regions, fx.weak, {});
    REQUIRE(mined.positives.size() == 1);
    REQUIRE(mined.negatives.size() == 1);
    CHECK(mined.discarded == 1);
    CHECK(mined.positives[0].region_id == 0);
    CHECK(mined.positives[0].fraction == doctest::Approx(0.9));
    CHECK(mined.negatives[0].region_id == 2);
    CHECK(mined.negatives[0].fraction == doctest::Approx(0.1));
}

TEST_CASE("both strict boundaries discard") {
    const Fixture fx = fixture_of({{10, 8}, {10, 2}});
    const MinedLabels mined = mine_labels(fx.regions, fx.weak, {});
    CHECK(mined.positives.empty());
    CHECK(mined.negatives.empty());
    CHECK(mined.discarded == 2);
}

TEST_CASE("threshold validation") {
    MiningThresholds bad;
    bad.positive_min = 0.2;
    bad.negative_max = 0.8;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("mining strictness and brute-force equality on random fixtures") {
    Rng rng(512);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<std::size_t, std::size_t>> rows;
        const std::size_t n = 3 + rng.next_below(20);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t area = 1 + rng.next_below(30);
            rows.push_back({area, rng.next_below(area + 1)});
        }
        const Fixture fx = fixture_of(rows);
        const MiningThresholds thresholds;
        const MinedLabels mined = mine_labels(fx.regions, fx.weak, thresholds);

        auto recount = [&](int id) {
            std::size_t covered = 0;
            for (std::uint32_t px : fx.regions.regions[id].pixels)
                covered += fx.weak.data[px] == kCropland;
            return static_cast<double>(covered) /
                   static_cast<double>(fx.regions.regions[id].area_px);
        };
        for (const auto& entry : mined.positives) {
            CHECK(entry.fraction > thresholds.positive_min);
            CHECK(entry.fraction == recount(entry.region_id));
        }
        for (const auto& entry : mined.negatives) {
            CHECK(entry.fraction < thresholds.negative_max);
            CHECK(entry.fraction == recount(entry.region_id));
        }
        CHECK(mined.positives.size() + mined.negatives.size() + mined.discarded ==
              fx.regions.regions.size());

        // Polarity disjointness.
        for (const auto& p : mined.positives)
            for (const auto& q : mined.negatives) CHECK(p.region_id != q.region_id);
    }
}

TEST_CASE("composition follows the precedence table") {
    const Fixture fx = fixture_of({{6, 6}, {6, 0}});
    const MinedLabels mined = mine_labels(fx.regions, fx.weak, {});
    REQUIRE(mined.positives.size() == 1);
    REQUIRE(mined.negatives.size() == 1);

    LabelMask human = make_mask(fx.regions.width, fx.regions.height,
                                MaskKind::SparseHuman);
    human.data[0] = kNonCropland; // conflicts with the mined-positive region

    const LabelMask extended = compose_extended_mask(human, mined, fx.regions);
    CHECK(extended.kind == MaskKind::Extended);
    CHECK(extended.data[0] == kNonCropland);           // human wins
    CHECK(extended.data[1] == kCropland);              // mined positive
    CHECK(extended.at(1, 0) == kNonCropland);          // mined negative
    CHECK(extended.at(1, static_cast<int>(5)) == kNonCropland);
}

TEST_CASE("empty mined labels compose to the human mask") {
    LabelMask human = make_mask(4, 2, MaskKind::SparseHuman);
    human.data[3] = kCropland;
    RegionSet set;
    set.width = 4;
    set.height = 2;
    const LabelMask extended = compose_extended_mask(human, {}, set);
    CHECK(extended.data == human.data);
}

TEST_CASE("human pixels survive composition on random fixtures") {
    Rng rng(64);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<std::size_t, std::size_t>> rows;
        const std::size_t n = 4 + rng.next_below(12);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t area = 2 + rng.next_below(20);
            rows.push_back({area, rng.next_below(area + 1)});
        }
        const Fixture fx = fixture_of(rows);
        const MinedLabels mined = mine_labels(fx.regions, fx.weak, {});

        LabelMask human = make_mask(fx.regions.width, fx.regions.height,
                                    MaskKind::SparseHuman);
        for (auto& code : human.data)
            code = static_cast<std::uint8_t>(rng.next_below(3));

        const LabelMask extended = compose_extended_mask(human, mined, fx.regions);
        for (std::size_t i = 0; i < human.size(); ++i)
            if (human.data[i] != kUnknown) CHECK(extended.data[i] == human.data[i]);

        // Monotonicity: restricting to one polarity never changes a pixel
        // that both compositions know.
        const LabelMask negatives_only = compose_extended_mask(
            human, restrict_polarity(mined, Polarity::NegativesOnly), fx.regions);
        for (std::size_t i = 0; i < human.size(); ++i)
            if (negatives_only.data[i] != kUnknown && extended.data[i] != kUnknown &&
                human.data[i] == kUnknown) {
                // A pixel known to both is a negative-region pixel; it keeps
                // its value when positives are added back.
                if (negatives_only.data[i] == kNonCropland)
                    CHECK(extended.data[i] == kNonCropland);
            }
    }
}

TEST_CASE("mined summary converts pixel areas to square kilometres") {
    const Fixture fx = fixture_of({{1000, 1000}});
    const MinedLabels mined = mine_labels(fx.regions, fx.weak, {});
    REQUIRE(mined.positives.size() == 1);
    const MinedSummary summary = mined_summary(mined, fx.regions, 4.7);
    CHECK(summary.positive_count == 1);
    CHECK(summary.positive_px == 1000);
    CHECK(summary.positive_km2 == doctest::Approx(0.02209).epsilon(1e-12));
    CHECK(summary.negative_count == 0);
    CHECK(summary.negative_km2 == 0.0);
}

TEST_CASE("polarity restriction drops exactly one side") {
    MinedLabels mined;
    mined.positives = {{0, 0.9}};
    mined.negatives = {{1, 0.1}};
    const MinedLabels pos = restrict_polarity(mined, Polarity::PositivesOnly);
    CHECK(pos.positives.size() == 1);
    CHECK(pos.negatives.empty());
    const MinedLabels neg = restrict_polarity(mined, Polarity::NegativesOnly);
    CHECK(neg.positives.empty());
    CHECK(neg.negatives.size() == 1);
    const MinedLabels both = restrict_polarity(mined, Polarity::Both);
    CHECK(both.positives.size() == 1);
    CHECK(both.negatives.size() == 1);
}

TEST_CASE("mined labels JSON round-trip") {
    MinedLabels mined;
    mined.positives = {{3, 0.875}};
    mined.negatives = {{7, 0.0625}};
    mined.discarded = 2;
    const std::string text = mined_to_json(mined, {}, {});
    const MinedLabels back = mined_from_json(text);
    CHECK(back.positives.size() == 1);
    CHECK(back.positives[0].region_id == 3);
    CHECK(back.positives[0].fraction == 0.875);
    CHECK(back.negatives[0].region_id == 7);
    CHECK(back.discarded == 2);
}
