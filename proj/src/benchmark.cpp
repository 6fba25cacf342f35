#include "cropmine/benchmark.hpp"

namespace cropmine {

SceneConfig benchmark_scene_config() {
    SceneConfig config = default_scene_config(256, 256);
    config.field_count = 20;
    config.field_size_min = 14;
    config.field_size_max = 36;
    config.field_margin = 5;
    config.background_sites = 14;
    config.human_polygon_count = 67;
    config.human_coverage = 0.04056;
    config.human_crop_share = 0.72;
    config.corruption.shift_dx = 3;
    config.corruption.shift_dy = 3;
    config.corruption.dilation_radius = 2;
    config.corruption.flip_rate = 0.10;
    return config;
}

ScenarioConfigs benchmark_scenario_configs() {
    ScenarioConfigs configs;
    configs.cluster.k = 10;
    configs.cluster.max_iters = 100;
    configs.cluster.tol = 1e-6;
    configs.cluster_sample_size = 20000;
    configs.standardize_bands = true;
    configs.connectivity = 4;
    // Desk-scale filter band. A 256x256 scene produces a region-count tail
    // ~250x smaller than a 4096x4096 quad, so the module-default band
    // (0.99, 0.25) would keep only a handful of sliver regions here. This
    // band keeps the object-sized middle of the distribution instead.
    configs.q_small = 0.97;
    configs.q_large = 0.98;
    configs.thresholds.positive_min = 0.80;
    configs.thresholds.negative_max = 0.20;
    configs.hyper.learning_rate = 0.015;
    configs.hyper.epochs = 250;
    configs.hyper.batch_size = 256;
    configs.hyper.window_radius = 1;
    configs.hyper.l2 = 1e-4;
    configs.threads = 1;
    return configs;
}

} // namespace cropmine
