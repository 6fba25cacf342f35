#include "cropmine/clustering.hpp"

#include "cropmine/error.hpp"
#include "cropmine/parallel.hpp"
#include "cropmine/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace cropmine {

using nlohmann::json;

BandStats BandStats::identity(std::size_t cols) {
    BandStats stats;
    stats.mean.assign(cols, 0.0);
    stats.std_dev.assign(cols, 1.0);
    stats.constant.assign(cols, false);
    return stats;
}

FeatureMatrix sample_pixels(const std::vector<const Raster*>& rasters,
                            std::size_t n, std::uint64_t seed) {
    if (rasters.empty()) throw ConfigError("no rasters to sample from");
    std::size_t total = 0;
    const int bands = rasters[0]->bands;
    for (const Raster* raster : rasters) {
        raster->validate();
        if (raster->bands != bands)
            throw ConfigError("pooled rasters must share the band count");
        total += raster->plane();
    }
    if (n < 1 || n > total)
        throw ConfigError("sample size " + std::to_string(n) +
                          " outside [1, " + std::to_string(total) + "]");

    // Partial Fisher-Yates over the implicit concatenated index array; only
    // displaced entries are stored, so memory stays O(n).
    Rng rng(seed);
    std::unordered_map<std::size_t, std::size_t> displaced;
    displaced.reserve(n * 2);
    auto slot = [&displaced](std::size_t i) {
        auto it = displaced.find(i);
        return it == displaced.end() ? i : it->second;
    };

    FeatureMatrix features;
    features.rows = n;
    features.cols = static_cast<std::size_t>(bands);
    features.data.resize(n * features.cols);

    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      rng.next_below(static_cast<std::uint64_t>(total - i)));
        std::size_t pick = slot(j);
        displaced[j] = slot(i);
        const Raster* source = rasters[0];
        for (const Raster* raster : rasters) {
            if (pick < raster->plane()) {
                source = raster;
                break;
            }
            pick -= raster->plane();
        }
        const std::size_t plane = source->plane();
        for (std::size_t b = 0; b < features.cols; ++b)
            features.at(i, b) = source->data[b * plane + pick];
    }
    return features;
}

FeatureMatrix sample_pixels(const Raster& raster, std::size_t n, std::uint64_t seed) {
    return sample_pixels(std::vector<const Raster*>{&raster}, n, seed);
}

std::pair<FeatureMatrix, BandStats> standardize(const FeatureMatrix& features) {
    if (features.rows < 2)
        throw ConfigError("standardize needs at least 2 rows");
    BandStats stats;
    stats.mean.assign(features.cols, 0.0);
    stats.std_dev.assign(features.cols, 0.0);
    stats.constant.assign(features.cols, false);

    for (std::size_t r = 0; r < features.rows; ++r)
        for (std::size_t c = 0; c < features.cols; ++c)
            stats.mean[c] += features.at(r, c);
    for (std::size_t c = 0; c < features.cols; ++c)
        stats.mean[c] /= static_cast<double>(features.rows);

    for (std::size_t r = 0; r < features.rows; ++r)
        for (std::size_t c = 0; c < features.cols; ++c) {
            const double d = features.at(r, c) - stats.mean[c];
            stats.std_dev[c] += d * d;
        }
    for (std::size_t c = 0; c < features.cols; ++c) {
        stats.std_dev[c] =
            std::sqrt(stats.std_dev[c] / static_cast<double>(features.rows - 1));
        if (stats.std_dev[c] <= 0.0) {
            stats.constant[c] = true;
            stats.std_dev[c] = 1.0;
            stats.mean[c] = 0.0; // passthrough
        }
    }

    FeatureMatrix scaled = features;
    for (std::size_t r = 0; r < scaled.rows; ++r)
        apply_stats(stats, scaled.data.data() + r * scaled.cols);
    return {std::move(scaled), std::move(stats)};
}

void apply_stats(const BandStats& stats, double* values) {
    for (std::size_t c = 0; c < stats.size(); ++c)
        if (!stats.constant[c])
            values[c] = (values[c] - stats.mean[c]) / stats.std_dev[c];
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double sum = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

/// Nearest centroid index, ties to the lowest index.
std::size_t nearest_centroid(const double* point,
                             const std::vector<std::vector<double>>& centroids,
                             std::size_t dim, double* dist_out = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.size(); ++k) {
        const double d = sq_dist(point, centroids[k].data(), dim);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

std::vector<std::vector<double>> kmeanspp_init(const FeatureMatrix& points, int k,
                                               std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t dim = points.cols;
    std::vector<std::vector<double>> centroids;
    centroids.reserve(static_cast<std::size_t>(k));

    const std::size_t first =
        static_cast<std::size_t>(rng.next_below(points.rows));
    centroids.emplace_back(points.row_ptr(first), points.row_ptr(first) + dim);

    std::vector<double> d2(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i)
        d2[i] = sq_dist(points.row_ptr(i), centroids[0].data(), dim);

    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t chosen;
        if (total <= 0.0) {
            // All remaining mass at distance zero (duplicate points).
            chosen = static_cast<std::size_t>(rng.next_below(points.rows));
        } else {
            double target = rng.next_double() * total;
            chosen = points.rows - 1;
            for (std::size_t i = 0; i < points.rows; ++i) {
                target -= d2[i];
                if (target <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.emplace_back(points.row_ptr(chosen), points.row_ptr(chosen) + dim);
        const auto& added = centroids.back();
        for (std::size_t i = 0; i < points.rows; ++i)
            d2[i] = std::min(d2[i], sq_dist(points.row_ptr(i), added.data(), dim));
    }
    return centroids;
}

} // namespace

double inertia_of(const FeatureMatrix& standardized,
                  const std::vector<std::vector<double>>& centroids) {
    double total = 0.0;
    for (std::size_t i = 0; i < standardized.rows; ++i) {
        double d;
        nearest_centroid(standardized.row_ptr(i), centroids, standardized.cols, &d);
        total += d;
    }
    return total;
}

ClusterModel fit_kmeans(const FeatureMatrix& points, const BandStats& stats,
                        const ClusterConfig& config) {
    if (config.k < 1) throw ConfigError("k must be >= 1");
    if (config.k > 256)
        throw ConfigError("k must be <= 256 (cluster maps store 8-bit codes)");
    if (config.max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (points.rows < static_cast<std::size_t>(config.k))
        throw ConfigError("k-means needs at least k rows: have " +
                          std::to_string(points.rows) + ", k=" +
                          std::to_string(config.k));

    const std::size_t dim = points.cols;
    std::vector<std::vector<double>> centroids;
    if (config.init_centroids) {
        centroids = *config.init_centroids;
        if (centroids.size() != static_cast<std::size_t>(config.k))
            throw ConfigError("explicit init must supply exactly k centroids");
        for (const auto& c : centroids)
            if (c.size() != dim)
                throw ConfigError("explicit centroid dimension mismatch");
    } else {
        centroids = kmeanspp_init(points, config.k, config.seed);
    }

    std::vector<std::size_t> assignment(points.rows, 0);
    std::vector<double> point_dist(points.rows, 0.0);
    ClusterModel model;
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < config.max_iters; ++iter) {
        // Assignment pass.
        double inertia = 0.0;
        for (std::size_t i = 0; i < points.rows; ++i) {
            assignment[i] =
                nearest_centroid(points.row_ptr(i), centroids, dim, &point_dist[i]);
            inertia += point_dist[i];
        }
        model.inertia = inertia;
        model.iterations_run = iter + 1;
        model.inertia_trace.push_back(inertia);

        const bool converged =
            prev_inertia != std::numeric_limits<double>::infinity() &&
            (prev_inertia <= 0.0 ||
             (prev_inertia - inertia) / prev_inertia < config.tol);
        prev_inertia = inertia;
        // Stop with the centroids the final inertia was measured against.
        if (converged || iter + 1 == config.max_iters) break;

        // Update pass.
        std::vector<std::vector<double>> next(centroids.size(),
                                              std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(centroids.size(), 0);
        for (std::size_t i = 0; i < points.rows; ++i) {
            auto& acc = next[assignment[i]];
            const double* row = points.row_ptr(i);
            for (std::size_t c = 0; c < dim; ++c) acc[c] += row[c];
            ++counts[assignment[i]];
        }
        for (std::size_t k = 0; k < next.size(); ++k) {
            if (counts[k] == 0) {
                // Reseed with the point farthest from its assigned centroid.
                std::size_t far = 0;
                for (std::size_t i = 1; i < points.rows; ++i)
                    if (point_dist[i] > point_dist[far]) far = i;
                next[k].assign(points.row_ptr(far), points.row_ptr(far) + dim);
                point_dist[far] = 0.0; // keep reseeds distinct within a pass
            } else {
                for (std::size_t c = 0; c < dim; ++c)
                    next[k][c] /= static_cast<double>(counts[k]);
            }
        }
        centroids = std::move(next);
    }

    model.k = config.k;
    model.centroids = std::move(centroids);
    model.stats = stats;
    return model;
}

LabelMask assign_clusters(const Raster& raster, const ClusterModel& model,
                          int threads) {
    raster.validate();
    if (model.centroids.empty() || model.centroids.size() > 256)
        throw ConfigError("model must hold between 1 and 256 centroids");
    if (static_cast<std::size_t>(raster.bands) != model.stats.size())
        throw ConfigError("raster has " + std::to_string(raster.bands) +
                          " bands but the model expects " +
                          std::to_string(model.stats.size()));

    LabelMask mask = make_mask(raster.width, raster.height, MaskKind::Cluster, 0);
    const std::size_t plane = raster.plane();
    const std::size_t dim = model.stats.size();

    parallel_for(plane, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> pixel(dim);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t b = 0; b < dim; ++b)
                pixel[b] = raster.data[b * plane + i];
            apply_stats(model.stats, pixel.data());
            mask.data[i] = static_cast<std::uint8_t>(
                nearest_centroid(pixel.data(), model.centroids, dim));
        }
    });
    return mask;
}

namespace {

json stats_to_json(const BandStats& stats) {
    return {{"mean", stats.mean},
            {"std", stats.std_dev},
            {"constant", std::vector<int>(stats.constant.begin(), stats.constant.end())}};
}

BandStats stats_from_json(const json& j) {
    BandStats stats;
    stats.mean = j.at("mean").get<std::vector<double>>();
    stats.std_dev = j.at("std").get<std::vector<double>>();
    const auto flags = j.at("constant").get<std::vector<int>>();
    stats.constant.assign(flags.begin(), flags.end());
    if (stats.std_dev.size() != stats.mean.size() ||
        stats.constant.size() != stats.mean.size())
        throw FormatError("inconsistent band statistics");
    return stats;
}

} // namespace

std::string cluster_model_to_json(const ClusterModel& model) {
    json j = {{"k", model.k},
              {"centroids", model.centroids},
              {"stats", stats_to_json(model.stats)},
              {"inertia", model.inertia},
              {"iterations", model.iterations_run},
              {"inertia_trace", model.inertia_trace}};
    return j.dump(2) + "\n";
}

ClusterModel cluster_model_from_json(const std::string& text) {
    ClusterModel model;
    try {
        const json j = json::parse(text);
        model.k = j.at("k").get<int>();
        model.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
        model.stats = stats_from_json(j.at("stats"));
        model.inertia = j.at("inertia").get<double>();
        model.iterations_run = j.at("iterations").get<int>();
        model.inertia_trace = j.value("inertia_trace", std::vector<double>{});
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad cluster model: ") + e.what());
    }
    if (model.centroids.size() != static_cast<std::size_t>(model.k))
        throw FormatError("cluster model centroid count does not match k");
    return model;
}

void save_cluster_model(const ClusterModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << cluster_model_to_json(model);
}

ClusterModel load_cluster_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("missing model file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return cluster_model_from_json(text);
}

} // namespace cropmine
