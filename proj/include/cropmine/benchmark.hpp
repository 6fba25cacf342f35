#pragma once

#include "cropmine/evaluation.hpp"
#include "cropmine/synth.hpp"

#include <array>
#include <cstdint>

namespace cropmine {

// The fixed desk-scale benchmark: five 256x256 scenes (seeds 0..4) with a
// committed corruption config of shift 3 px, dilation radius 2 and flip rate
// 0.10. The scene recipe and scenario settings below are frozen; the
// acceptance suite and the `scenarios` CLI defaults both use them.

inline constexpr std::array<std::uint64_t, 5> kBenchmarkSeeds{0, 1, 2, 3, 4};

/// Scene recipe for one benchmark scene. The seed field is left at 0; pass
/// the scene seed to generate_scene explicitly.
SceneConfig benchmark_scene_config();

/// Clustering, filtering, mining and training settings for the benchmark.
ScenarioConfigs benchmark_scenario_configs();

} // namespace cropmine
