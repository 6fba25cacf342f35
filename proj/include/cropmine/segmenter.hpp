#pragma once

#include "cropmine/clustering.hpp"
#include "cropmine/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cropmine {

struct SegHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs = 50;
    int batch_size = 1024;
    int window_radius = 1;
    double l2 = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-pixel logistic classifier over band values plus local window means.
struct SegModel {
    std::vector<double> weights;
    double bias = 0.0;
    int window_radius = 1;
    int bands = 0;
    BandStats feature_stats;
    std::vector<double> epoch_loss; // full-training loss after each epoch
};

/// Raw per-pixel features: the band values, and for window_radius > 0 also
/// the per-band means over the (2r+1)^2 window with coordinates clamped to
/// the grid (border pixels repeat). Standardization is applied separately
/// with training-set statistics.
FeatureMatrix compute_features(const Raster& raster, int window_radius,
                               int threads = 1);

/// Mean binary cross-entropy with an (l2/2)*||w||^2 penalty (bias excluded)
/// over the listed rows; p = logistic(w.x + b), per-sample logit gradient
/// p - y. grad holds d/dw for each weight with d/db last.
double loss_and_gradient(const std::vector<double>& weights, double bias,
                         const FeatureMatrix& features,
                         const std::vector<std::uint8_t>& labels,
                         const std::vector<std::size_t>& rows, double l2,
                         std::vector<double>& grad);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

/// One Adam update with bias correction; increments the step count.
void adam_update(std::vector<double>& params, const std::vector<double>& grad,
                 AdamState& state, const SegHyper& hyper);

/// Train on pixels whose mask code is known (non-unknown); cropland maps to
/// label 1, non-cropland to 0. Deterministic given hyper.seed.
SegModel train_segmenter(const Raster& raster, const LabelMask& training_mask,
                         const SegHyper& hyper, int threads = 1);

/// Same, with the raw feature matrix precomputed (must match the raster and
/// hyper.window_radius).
SegModel train_segmenter_with_features(const FeatureMatrix& raw_features,
                                       const Raster& raster,
                                       const LabelMask& training_mask,
                                       const SegHyper& hyper);

/// Total predicted mask over {non-cropland, cropland}: p > 0.5 is cropland.
LabelMask predict_mask(const Raster& raster, const SegModel& model,
                       int threads = 1);
LabelMask predict_mask_with_features(const FeatureMatrix& raw_features,
                                     const Raster& raster, const SegModel& model,
                                     int threads = 1);

std::string seg_model_to_json(const SegModel& model);
SegModel seg_model_from_json(const std::string& text);
void save_seg_model(const SegModel& model, const std::string& path);
SegModel load_seg_model(const std::string& path);

} // namespace cropmine
