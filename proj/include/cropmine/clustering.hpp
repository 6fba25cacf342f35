#pragma once

#include "cropmine/raster.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cropmine {

/// Dense row-major matrix of per-pixel feature vectors.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double at(std::size_t row, std::size_t col) const {
        return data[row * cols + col];
    }
    double& at(std::size_t row, std::size_t col) { return data[row * cols + col]; }
    const double* row_ptr(std::size_t row) const { return data.data() + row * cols; }
};

/// Per-column mean and sample standard deviation (n-1 denominator) from the
/// fitting sample. Constant columns are flagged and passed through unscaled.
struct BandStats {
    std::vector<double> mean;
    std::vector<double> std_dev;
    std::vector<bool> constant;

    std::size_t size() const { return mean.size(); }
    /// Identity stats: standardization becomes a no-op.
    static BandStats identity(std::size_t cols);
};

struct ClusterConfig {
    int k = 10;
    int max_iters = 100;
    double tol = 1e-6; // relative inertia-change stopping threshold
    std::uint64_t seed = 0;
    // When set, used verbatim instead of k-means++ seeding. Must hold
    // exactly k centroids of the feature dimension.
    std::optional<std::vector<std::vector<double>>> init_centroids;
};

struct ClusterModel {
    int k = 0;
    std::vector<std::vector<double>> centroids; // in standardized band space
    BandStats stats;
    double inertia = 0.0;
    int iterations_run = 0;
    std::vector<double> inertia_trace; // inertia after each assignment pass
};

/// Sample n distinct pixel positions uniformly without replacement; rows are
/// raw band vectors in sample order. Throws ConfigError when n exceeds the
/// pixel count.
FeatureMatrix sample_pixels(const Raster& raster, std::size_t n, std::uint64_t seed);

/// Pooled variant: positions are drawn uniformly over the concatenated pixel
/// space of several rasters (all with the same band count), the way one model
/// is fitted across many quads.
FeatureMatrix sample_pixels(const std::vector<const Raster*>& rasters,
                            std::size_t n, std::uint64_t seed);

/// Center and scale each column to mean 0, sample std 1. Returns the scaled
/// matrix and the statistics used.
std::pair<FeatureMatrix, BandStats> standardize(const FeatureMatrix& features);

/// Apply previously computed statistics to a feature vector in place.
void apply_stats(const BandStats& stats, double* values);

/// Lloyd iterations on a standardized sample until the relative inertia
/// change drops below tol or max_iters is reached. Distance ties break to
/// the lowest centroid index; an emptied cluster is reseeded with the point
/// farthest from its assigned centroid.
ClusterModel fit_kmeans(const FeatureMatrix& standardized, const BandStats& stats,
                        const ClusterConfig& config);

/// Assign every pixel of the raster to its nearest centroid after
/// standardizing with the model statistics.
LabelMask assign_clusters(const Raster& raster, const ClusterModel& model,
                          int threads = 1);

/// Sum of squared distances from each row to its nearest centroid.
double inertia_of(const FeatureMatrix& standardized,
                  const std::vector<std::vector<double>>& centroids);

std::string cluster_model_to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const std::string& text);

void save_cluster_model(const ClusterModel& model, const std::string& path);
ClusterModel load_cluster_model(const std::string& path);

} // namespace cropmine
