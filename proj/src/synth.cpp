#include "cropmine/synth.hpp"

#include "cropmine/error.hpp"
#include "cropmine/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace cropmine {

using nlohmann::json;

void CorruptionConfig::validate() const {
    if (dilation_radius < 0)
        throw ConfigError("dilation_radius must be >= 0");
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0))
        throw ConfigError("flip_rate must be in [0, 1]");
}

void SceneConfig::validate() const {
    if (width < 1 || height < 1 || bands < 1)
        throw ConfigError("scene dimensions must be >= 1");
    if (field_count < 0)
        throw ConfigError("field_count must be >= 0");
    if (field_count > 0 &&
        (field_size_min < 1 || field_size_max < field_size_min ||
         field_size_max > std::min(width, height)))
        throw ConfigError("field size range must fit inside the scene");
    if (field_margin < 1)
        throw ConfigError("field_margin must be >= 1");
    if (non_crop_subclass_count < 1)
        throw ConfigError("need at least one non-crop subclass");
    if (class_spectra.size() != static_cast<std::size_t>(1 + non_crop_subclass_count))
        throw ConfigError("class_spectra must hold cropland plus one spectrum "
                          "per non-crop subclass");
    for (const auto& spectrum : class_spectra) {
        if (spectrum.mean.size() != static_cast<std::size_t>(bands))
            throw ConfigError("class spectrum length must equal the band count");
        if (spectrum.noise_sigma < 0.0)
            throw ConfigError("noise sigma must be >= 0");
        if (spectrum.object_jitter < 0.0)
            throw ConfigError("object_jitter must be >= 0");
    }
    if (background_sites < 1)
        throw ConfigError("background_sites must be >= 1");
    if (object_jitter < 0.0)
        throw ConfigError("object_jitter must be >= 0");
    if (human_polygon_count < 0)
        throw ConfigError("human_polygon_count must be >= 0");
    if (human_polygon_count > 0 &&
        !(human_coverage > 0.0 && human_coverage <= 0.08))
        throw ConfigError("human_coverage must be in (0, 0.08] so the sparse "
                          "mask stays >= 90% unknown");
    if (human_crop_share > 1.0)
        throw ConfigError("human_crop_share must be <= 1 (negative = uniform)");
    corruption.validate();
}

SceneConfig default_scene_config(int width, int height) {
    SceneConfig config;
    config.width = width;
    config.height = height;
    // Managed fields are spectrally homogeneous; bare/dry ground varies a lot
    // from patch to patch and sits closest to cropland in band space.
    config.class_spectra = {
        {{0.060, 0.100, 0.080, 0.430, 0.260}, 0.020, 0.012}, // cropland
        {{0.035, 0.070, 0.050, 0.300, 0.140}, 0.020, 0.025}, // woodland
        {{0.080, 0.090, 0.070, 0.050, 0.040}, 0.020, 0.015}, // water / shadow
        {{0.080, 0.118, 0.120, 0.385, 0.255}, 0.020, 0.055}, // bare soil
    };
    return config;
}

namespace {

struct FieldRect {
    int row, col, height, width;
};

bool rects_touch(const FieldRect& a, const FieldRect& b, int gap) {
    return a.row < b.row + b.height + gap && b.row < a.row + a.height + gap &&
           a.col < b.col + b.width + gap && b.col < a.col + a.width + gap;
}

std::vector<FieldRect> place_fields(const SceneConfig& config, Rng& rng) {
    std::vector<FieldRect> fields;
    fields.reserve(static_cast<std::size_t>(config.field_count));
    int attempts_left = config.field_count * 400;
    while (static_cast<int>(fields.size()) < config.field_count) {
        if (attempts_left-- <= 0)
            throw StageError("synth", "could not place " +
                                          std::to_string(config.field_count) +
                                          " non-overlapping fields; placed " +
                                          std::to_string(fields.size()));
        FieldRect rect;
        rect.height = static_cast<int>(
            rng.next_in(config.field_size_min, config.field_size_max));
        rect.width = static_cast<int>(
            rng.next_in(config.field_size_min, config.field_size_max));
        rect.row = static_cast<int>(
            rng.next_below(static_cast<std::uint64_t>(config.height - rect.height + 1)));
        rect.col = static_cast<int>(
            rng.next_below(static_cast<std::uint64_t>(config.width - rect.width + 1)));
        bool clear = true;
        for (const auto& other : fields)
            if (rects_touch(rect, other, config.field_margin)) {
                clear = false;
                break;
            }
        if (clear) fields.push_back(rect);
    }
    return fields;
}

} // namespace

SceneBundle generate_scene(const SceneConfig& config, std::uint64_t seed) {
    config.validate();
    const int w = config.width;
    const int h = config.height;

    // Crop fields.
    Rng field_rng(sub_seed(seed, "fields"));
    const auto fields = place_fields(config, field_rng);

    // Background Voronoi cells, subclass assigned round-robin by site index.
    Rng site_rng(sub_seed(seed, "sites"));
    std::vector<std::pair<int, int>> sites(static_cast<std::size_t>(config.background_sites));
    for (auto& site : sites) {
        site.first = static_cast<int>(site_rng.next_below(static_cast<std::uint64_t>(h)));
        site.second = static_cast<int>(site_rng.next_below(static_cast<std::uint64_t>(w)));
    }

    // Per-object spectral offsets: fields first, then sites.
    Rng jitter_rng(sub_seed(seed, "jitter"));
    auto jitter_of = [&config](const ClassSpectrum& spectrum) {
        return spectrum.object_jitter > 0.0 ? spectrum.object_jitter
                                            : config.object_jitter;
    };
    auto draw_offset = [&](std::vector<double>& out, double sigma) {
        out.resize(static_cast<std::size_t>(config.bands));
        for (auto& v : out) v = sigma * jitter_rng.next_normal();
    };
    std::vector<std::vector<double>> field_offset(fields.size());
    for (auto& offset : field_offset)
        draw_offset(offset, jitter_of(config.class_spectra[0]));
    std::vector<std::vector<double>> site_offset(sites.size());
    for (std::size_t s = 0; s < sites.size(); ++s)
        draw_offset(site_offset[s],
                    jitter_of(config.class_spectra[1 + s % config.non_crop_subclass_count]));

    // Truth and the per-pixel object index.
    SceneBundle bundle;
    bundle.truth = make_mask(w, h, MaskKind::Truth, kNonCropland);
    std::vector<std::int32_t> field_of(static_cast<std::size_t>(w) * h, -1);
    for (std::size_t f = 0; f < fields.size(); ++f) {
        const auto& rect = fields[f];
        for (int r = rect.row; r < rect.row + rect.height; ++r)
            for (int c = rect.col; c < rect.col + rect.width; ++c) {
                bundle.truth.at(r, c) = kCropland;
                field_of[static_cast<std::size_t>(r) * w + c] =
                    static_cast<std::int32_t>(f);
            }
    }

    auto nearest_site = [&sites](int row, int col) {
        std::size_t best = 0;
        std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
        for (std::size_t s = 0; s < sites.size(); ++s) {
            const std::int64_t dr = sites[s].first - row;
            const std::int64_t dc = sites[s].second - col;
            const std::int64_t d = dr * dr + dc * dc;
            if (d < best_d) {
                best_d = d;
                best = s;
            }
        }
        return best;
    };

    // Imagery: class spectrum + object offset + iid Gaussian noise. The noise
    // stream is consumed pixel by pixel (row-major), band innermost, so the
    // scene is reproducible from (config, seed) alone.
    Rng noise_rng(sub_seed(seed, "noise"));
    bundle.imagery.width = w;
    bundle.imagery.height = h;
    bundle.imagery.bands = config.bands;
    bundle.imagery.data.resize(bundle.imagery.size());
    const std::size_t plane = bundle.imagery.plane();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const std::size_t px = static_cast<std::size_t>(r) * w + c;
            const std::int32_t f = field_of[px];
            const ClassSpectrum* spectrum;
            const std::vector<double>* offset;
            if (f >= 0) {
                spectrum = &config.class_spectra[0];
                offset = &field_offset[static_cast<std::size_t>(f)];
            } else {
                const std::size_t s = nearest_site(r, c);
                spectrum = &config.class_spectra[1 + s % config.non_crop_subclass_count];
                offset = &site_offset[s];
            }
            for (int b = 0; b < config.bands; ++b) {
                const double value = spectrum->mean[static_cast<std::size_t>(b)] +
                                     (*offset)[static_cast<std::size_t>(b)] +
                                     spectrum->noise_sigma * noise_rng.next_normal();
                bundle.imagery.data[static_cast<std::size_t>(b) * plane + px] =
                    static_cast<float>(value);
            }
        }
    }

    bundle.weak = corrupt_to_weak(bundle.truth, config.corruption, sub_seed(seed, "weak"));
    HumanSample human = sample_human_labels(bundle.truth, config.human_coverage,
                                            config.human_polygon_count,
                                            sub_seed(seed, "human"),
                                            config.human_crop_share);
    bundle.human = std::move(human.mask);
    bundle.human_polygons = std::move(human.polygons);

    std::size_t unknown = 0;
    for (std::uint8_t code : bundle.human.data)
        if (code == kUnknown) ++unknown;
    if (static_cast<double>(unknown) < 0.9 * static_cast<double>(bundle.human.size()))
        throw StageError("synth", "human mask has less than 90% unknown pixels");
    return bundle;
}

LabelMask corrupt_to_weak(const LabelMask& truth, const CorruptionConfig& config,
                          std::uint64_t seed) {
    config.validate();
    if (truth.kind != MaskKind::Truth && truth.kind != MaskKind::Weak)
        throw ConfigError("corrupt_to_weak expects a total mask");
    truth.validate(0);
    for (std::uint8_t code : truth.data)
        if (code == kUnknown)
            throw ConfigError("corrupt_to_weak input must be total over {1,2}");

    const int w = truth.width;
    const int h = truth.height;
    LabelMask weak = make_mask(w, h, MaskKind::Weak, kNonCropland);

    // Translate cropland; pixels shifted off the grid are lost and vacated
    // pixels stay non-crop.
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const int src_r = r - config.shift_dy;
            const int src_c = c - config.shift_dx;
            if (src_r >= 0 && src_r < h && src_c >= 0 && src_c < w &&
                truth.at(src_r, src_c) == kCropland)
                weak.at(r, c) = kCropland;
        }

    // Square dilation of the cropland class, separable in rows then columns.
    if (config.dilation_radius > 0) {
        const int radius = config.dilation_radius;
        LabelMask pass = weak;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (weak.at(r, c) == kCropland) continue;
                for (int d = -radius; d <= radius; ++d) {
                    const int cc = c + d;
                    if (cc >= 0 && cc < w && weak.at(r, cc) == kCropland) {
                        pass.at(r, c) = kCropland;
                        break;
                    }
                }
            }
        LabelMask dilated = pass;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (pass.at(r, c) == kCropland) continue;
                for (int d = -radius; d <= radius; ++d) {
                    const int rr = r + d;
                    if (rr >= 0 && rr < h && pass.at(rr, c) == kCropland) {
                        dilated.at(r, c) = kCropland;
                        break;
                    }
                }
            }
        weak = std::move(dilated);
    }

    // Independent category flips, one uniform draw per pixel in row-major
    // order regardless of outcome.
    Rng rng(seed);
    for (auto& code : weak.data) {
        const double u = rng.next_double();
        if (u < config.flip_rate)
            code = code == kCropland ? kNonCropland : kCropland;
    }
    return weak;
}

HumanSample sample_human_labels(const LabelMask& truth, double coverage_target,
                                int polygon_count, std::uint64_t seed,
                                double crop_share) {
    truth.validate(0);
    HumanSample sample;
    sample.mask = make_mask(truth.width, truth.height, MaskKind::SparseHuman);
    if (polygon_count == 0) return sample;
    if (!(coverage_target > 0.0 && coverage_target < 0.5))
        throw ConfigError("coverage_target must be in (0, 0.5)");
    if (crop_share > 1.0)
        throw ConfigError("crop_share must be <= 1");

    const int w = truth.width;
    const int h = truth.height;
    const double total_px = static_cast<double>(w) * h;
    const double target_px = coverage_target * total_px;

    Rng rng(seed);
    long placed_px = 0;
    long attempts_left = static_cast<long>(polygon_count) * 1000;

    for (int i = 0; i < polygon_count; ++i) {
        // Size the remaining polygons to land near the coverage target.
        const double remaining =
            std::max(target_px - static_cast<double>(placed_px), 1.0);
        const int base_side = std::clamp(
            static_cast<int>(std::lround(std::sqrt(remaining / (polygon_count - i)))),
            2, std::min(w, h));

        // A non-negative crop_share steers this polygon's target category.
        // The preference is dropped after enough failed attempts so scenes
        // missing a category entirely can still be annotated.
        std::uint8_t wanted = kUnknown; // unknown = no preference
        if (crop_share >= 0.0)
            wanted = rng.next_double() < crop_share ? kCropland : kNonCropland;
        long constrained_attempts = 300;

        bool placed = false;
        while (!placed) {
            if (wanted != kUnknown && constrained_attempts-- <= 0) wanted = kUnknown;
            if (attempts_left-- <= 0)
                throw StageError("synth",
                                 "could not reach human coverage " +
                                     std::to_string(coverage_target) + " with " +
                                     std::to_string(polygon_count) + " polygons");
            HumanPolygon poly;
            poly.height = std::clamp(base_side + static_cast<int>(rng.next_in(-1, 1)),
                                     2, h);
            poly.width = std::clamp(base_side + static_cast<int>(rng.next_in(-1, 1)),
                                    2, w);
            poly.row = static_cast<int>(
                rng.next_below(static_cast<std::uint64_t>(h - poly.height + 1)));
            poly.col = static_cast<int>(
                rng.next_below(static_cast<std::uint64_t>(w - poly.width + 1)));

            const std::uint8_t category = truth.at(poly.row, poly.col);
            if (wanted != kUnknown && category != wanted) continue;
            bool pure = category != kUnknown;
            for (int r = poly.row; pure && r < poly.row + poly.height; ++r)
                for (int c = poly.col; c < poly.col + poly.width; ++c)
                    if (truth.at(r, c) != category ||
                        sample.mask.at(r, c) != kUnknown) {
                        pure = false;
                        break;
                    }
            if (!pure) continue;

            poly.category = category;
            for (int r = poly.row; r < poly.row + poly.height; ++r)
                for (int c = poly.col; c < poly.col + poly.width; ++c)
                    sample.mask.at(r, c) = category;
            placed_px += static_cast<long>(poly.height) * poly.width;
            sample.polygons.push_back(poly);
            placed = true;
        }
    }

    const double coverage = static_cast<double>(placed_px) / total_px;
    if (std::abs(coverage - coverage_target) > 0.25 * coverage_target)
        throw StageError("synth", "human coverage " + std::to_string(coverage) +
                                      " missed target " +
                                      std::to_string(coverage_target) +
                                      " by more than 25%");
    return sample;
}

json scene_config_to_json(const SceneConfig& config) {
    json spectra = json::array();
    for (const auto& spectrum : config.class_spectra)
        spectra.push_back({{"mean", spectrum.mean},
                           {"noise_sigma", spectrum.noise_sigma},
                           {"object_jitter", spectrum.object_jitter}});
    return {{"width", config.width},
            {"height", config.height},
            {"bands", config.bands},
            {"field_count", config.field_count},
            {"field_size_min", config.field_size_min},
            {"field_size_max", config.field_size_max},
            {"field_margin", config.field_margin},
            {"class_spectra", spectra},
            {"non_crop_subclass_count", config.non_crop_subclass_count},
            {"background_sites", config.background_sites},
            {"object_jitter", config.object_jitter},
            {"corruption",
             {{"shift_dx", config.corruption.shift_dx},
              {"shift_dy", config.corruption.shift_dy},
              {"dilation_radius", config.corruption.dilation_radius},
              {"flip_rate", config.corruption.flip_rate}}},
            {"human_polygon_count", config.human_polygon_count},
            {"human_coverage", config.human_coverage},
            {"human_crop_share", config.human_crop_share},
            {"seed", config.seed}};
}

SceneConfig scene_config_from_json(const json& j) {
    SceneConfig config = default_scene_config();
    try {
        config.width = j.value("width", config.width);
        config.height = j.value("height", config.height);
        config.bands = j.value("bands", config.bands);
        config.field_count = j.value("field_count", config.field_count);
        config.field_size_min = j.value("field_size_min", config.field_size_min);
        config.field_size_max = j.value("field_size_max", config.field_size_max);
        config.field_margin = j.value("field_margin", config.field_margin);
        if (j.contains("class_spectra")) {
            config.class_spectra.clear();
            for (const auto& entry : j.at("class_spectra"))
                config.class_spectra.push_back(
                    {entry.at("mean").get<std::vector<double>>(),
                     entry.at("noise_sigma").get<double>(),
                     entry.value("object_jitter", 0.0)});
        }
        config.non_crop_subclass_count =
            j.value("non_crop_subclass_count", config.non_crop_subclass_count);
        config.background_sites = j.value("background_sites", config.background_sites);
        config.object_jitter = j.value("object_jitter", config.object_jitter);
        if (j.contains("corruption")) {
            const auto& c = j.at("corruption");
            config.corruption.shift_dx = c.value("shift_dx", config.corruption.shift_dx);
            config.corruption.shift_dy = c.value("shift_dy", config.corruption.shift_dy);
            config.corruption.dilation_radius =
                c.value("dilation_radius", config.corruption.dilation_radius);
            config.corruption.flip_rate = c.value("flip_rate", config.corruption.flip_rate);
        }
        config.human_polygon_count =
            j.value("human_polygon_count", config.human_polygon_count);
        config.human_coverage = j.value("human_coverage", config.human_coverage);
        config.human_crop_share = j.value("human_crop_share", config.human_crop_share);
        config.seed = j.value("seed", config.seed);
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad scene config: ") + e.what());
    }
    config.validate();
    return config;
}

void save_scene_manifest(const SceneConfig& config, std::uint64_t seed,
                         const std::string& path) {
    json j = {{"config", scene_config_to_json(config)}, {"seed", seed}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

std::pair<SceneConfig, std::uint64_t> load_scene_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("missing scene manifest: " + path);
    json j;
    try {
        in >> j;
        return {scene_config_from_json(j.at("config")), j.at("seed").get<std::uint64_t>()};
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad scene manifest: ") + e.what());
    }
}

} // namespace cropmine
