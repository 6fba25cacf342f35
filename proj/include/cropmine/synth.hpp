#pragma once

#include "cropmine/raster.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace cropmine {

/// Per-category spectral model: mean reflectance per band, the standard
/// deviation of the additive Gaussian pixel noise, and the per-object offset
/// spread (how much individual fields or patches of this category differ
/// from the category mean). A zero object_jitter falls back to the scene's
/// global object_jitter.
struct ClassSpectrum {
    std::vector<double> mean;
    double noise_sigma = 0.0;
    double object_jitter = 0.0;
};

/// Weak-layer corruption: translate the cropland class, dilate it with a
/// square structuring element, then flip each pixel independently.
struct CorruptionConfig {
    int shift_dx = 3;
    int shift_dy = 3;
    int dilation_radius = 2;
    double flip_rate = 0.10;

    void validate() const;
};

struct HumanPolygon {
    int row = 0, col = 0, height = 0, width = 0;
    std::uint8_t category = kNonCropland;
};

struct SceneConfig {
    int width = 256;
    int height = 256;
    int bands = 5;

    // Axis-aligned rectangular crop fields, placed without overlap and kept
    // field_margin pixels apart so each field stays its own object and
    // corridors between fields are wider than the weak-layer dilation.
    int field_count = 20;
    int field_size_min = 14;
    int field_size_max = 36;
    int field_margin = 5;

    // class_spectra[0] is cropland; the rest are the non-crop subclasses,
    // assigned round-robin to Voronoi cells of the background.
    std::vector<ClassSpectrum> class_spectra;
    int non_crop_subclass_count = 3;
    int background_sites = 14;

    // Per-object spectral offset: every field and every background cell gets
    // an iid N(0, sigma^2) shift per band, so each class is a spread of
    // object-level spectra rather than a single point. sigma is the class's
    // object_jitter when set, this global value otherwise.
    double object_jitter = 0.0;

    CorruptionConfig corruption;

    int human_polygon_count = 67;
    double human_coverage = 0.04056;
    // Fraction of human polygons drawn on cropland. Annotators of a cropland
    // map spend most of their budget delineating fields, so the default
    // leans cropland even though crop covers a minority of the scene.
    double human_crop_share = 0.72;

    std::uint64_t seed = 0;

    void validate() const;
};

/// Scene config with plausible five-band spectra (visible + NIR-like):
/// cropland, woodland, water/shadow, bare soil. Bare soil is deliberately
/// the crop-adjacent class.
SceneConfig default_scene_config(int width = 256, int height = 256);

struct HumanSample {
    LabelMask mask; // sparse_human
    std::vector<HumanPolygon> polygons;
};

/// One synthetic scene: imagery plus all three label layers. truth is total
/// over {non-cropland, cropland}; human labels are noise-free rectangles.
struct SceneBundle {
    Raster imagery;
    LabelMask truth;
    LabelMask weak;
    LabelMask human;
    std::vector<HumanPolygon> human_polygons;
};

/// Deterministic given (config, seed); all randomness comes from named
/// sub-streams of the seed.
SceneBundle generate_scene(const SceneConfig& config, std::uint64_t seed);

LabelMask corrupt_to_weak(const LabelMask& truth, const CorruptionConfig& config,
                          std::uint64_t seed);

/// polygon_count noise-free rectangles inside single-category areas of
/// truth, totalling coverage_target of the grid within +-25% relative.
/// crop_share picks the fraction of polygons aimed at cropland; a negative
/// value places polygons uniformly (category follows area share).
HumanSample sample_human_labels(const LabelMask& truth, double coverage_target,
                                int polygon_count, std::uint64_t seed,
                                double crop_share = -1.0);

nlohmann::json scene_config_to_json(const SceneConfig& config);
SceneConfig scene_config_from_json(const nlohmann::json& j);

void save_scene_manifest(const SceneConfig& config, std::uint64_t seed,
                         const std::string& path);
std::pair<SceneConfig, std::uint64_t> load_scene_manifest(const std::string& path);

} // namespace cropmine
