#include "cropmine/segmenter.hpp"

#include "cropmine/error.hpp"
#include "cropmine/parallel.hpp"
#include "cropmine/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cropmine {

using nlohmann::json;

void SegHyper::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("betas must be in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (window_radius < 0) throw ConfigError("window_radius must be >= 0");
    if (l2 < 0.0) throw ConfigError("l2 must be >= 0");
}

FeatureMatrix compute_features(const Raster& raster, int window_radius,
                               int threads) {
    raster.validate();
    if (window_radius < 0) throw ConfigError("window_radius must be >= 0");

    const int w = raster.width;
    const int h = raster.height;
    const int bands = raster.bands;
    const std::size_t plane = raster.plane();

    FeatureMatrix features;
    features.rows = plane;
    features.cols = window_radius == 0 ? static_cast<std::size_t>(bands)
                                       : static_cast<std::size_t>(2 * bands);
    features.data.resize(features.rows * features.cols);

    const int r = window_radius;
    const double window_px = static_cast<double>(2 * r + 1) * (2 * r + 1);

    parallel_for(plane, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t px = begin; px < end; ++px) {
            const int row = static_cast<int>(px) / w;
            const int col = static_cast<int>(px) % w;
            double* out = features.data.data() + px * features.cols;
            for (int b = 0; b < bands; ++b)
                out[b] = raster.data[static_cast<std::size_t>(b) * plane + px];
            if (r > 0) {
                for (int b = 0; b < bands; ++b) {
                    const float* band_plane =
                        raster.data.data() + static_cast<std::size_t>(b) * plane;
                    double sum = 0.0;
                    for (int dr = -r; dr <= r; ++dr) {
                        const int rr = std::clamp(row + dr, 0, h - 1);
                        for (int dc = -r; dc <= r; ++dc) {
                            const int cc = std::clamp(col + dc, 0, w - 1);
                            sum += band_plane[static_cast<std::size_t>(rr) * w + cc];
                        }
                    }
                    out[bands + b] = sum / window_px;
                }
            }
        }
    });
    return features;
}

double loss_and_gradient(const std::vector<double>& weights, double bias,
                         const FeatureMatrix& features,
                         const std::vector<std::uint8_t>& labels,
                         const std::vector<std::size_t>& rows, double l2,
                         std::vector<double>& grad) {
    if (rows.empty()) throw ConfigError("loss_and_gradient on an empty batch");
    if (weights.size() != features.cols)
        throw ConfigError("weight vector does not match the feature dimension");
    if (labels.size() != features.rows)
        throw ConfigError("label vector does not match the feature matrix");

    const std::size_t dim = weights.size();
    grad.assign(dim + 1, 0.0);
    double loss = 0.0;

    for (std::size_t row : rows) {
        const double* x = features.row_ptr(row);
        double z = bias;
        for (std::size_t c = 0; c < dim; ++c) z += weights[c] * x[c];
        const double y = labels[row] ? 1.0 : 0.0;
        // Stable: -y log p - (1-y) log(1-p) = log(1+exp(-|z|)) + max(z,0) - y z
        loss += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y * z;
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double dz = p - y;
        for (std::size_t c = 0; c < dim; ++c) grad[c] += dz * x[c];
        grad[dim] += dz;
    }

    const double inv_m = 1.0 / static_cast<double>(rows.size());
    loss *= inv_m;
    for (double& g : grad) g *= inv_m;
    for (std::size_t c = 0; c < dim; ++c) {
        loss += 0.5 * l2 * weights[c] * weights[c];
        grad[c] += l2 * weights[c];
    }
    return loss;
}

void adam_update(std::vector<double>& params, const std::vector<double>& grad,
                 AdamState& state, const SegHyper& hyper) {
    if (params.size() != grad.size())
        throw ConfigError("adam_update parameter/gradient shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw ConfigError("adam_update state shape mismatch");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
}

namespace {

std::vector<std::size_t> labeled_rows(const LabelMask& mask) {
    if (mask.kind == MaskKind::Cluster)
        throw ConfigError("cluster maps cannot be used as training masks");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask.data[i] != kUnknown) rows.push_back(i);
    return rows;
}

} // namespace

SegModel train_segmenter_with_features(const FeatureMatrix& raw_features,
                                       const Raster& raster,
                                       const LabelMask& training_mask,
                                       const SegHyper& hyper) {
    hyper.validate();
    if (training_mask.width != raster.width || training_mask.height != raster.height)
        throw ConfigError("training mask dimensions do not match the raster");
    if (raw_features.rows != raster.plane())
        throw ConfigError("feature matrix does not match the raster");

    const auto pixel_rows = labeled_rows(training_mask);
    if (pixel_rows.empty())
        throw StageError("train", "unlearnable scenario: no labeled pixels");

    // Gather the training submatrix and binary labels.
    FeatureMatrix train;
    train.rows = pixel_rows.size();
    train.cols = raw_features.cols;
    train.data.resize(train.rows * train.cols);
    std::vector<std::uint8_t> labels(train.rows);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < pixel_rows.size(); ++i) {
        const double* src = raw_features.row_ptr(pixel_rows[i]);
        std::copy(src, src + train.cols, train.data.begin() + i * train.cols);
        labels[i] = training_mask.data[pixel_rows[i]] == kCropland ? 1 : 0;
        positives += labels[i];
    }
    if (positives == 0 || positives == train.rows)
        throw StageError("train",
                         "unlearnable scenario: a category is absent from the "
                         "labeled pixels");
    if (train.rows < 2)
        throw StageError("train", "unlearnable scenario: need at least 2 labeled pixels");

    auto [standardized, stats] = standardize(train);

    SegModel model;
    model.window_radius = hyper.window_radius;
    model.bands = raster.bands;
    model.feature_stats = stats;

    std::vector<double> params(standardized.cols + 1, 0.0);
    AdamState state;
    Rng rng(hyper.seed);
    std::vector<std::size_t> order(standardized.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad;
    std::vector<std::size_t> batch;
    std::vector<double> weights(standardized.cols);
    std::vector<std::size_t> all_rows(standardized.rows);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(hyper.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            std::copy(params.begin(), params.end() - 1, weights.begin());
            loss_and_gradient(weights, params.back(), standardized, labels, batch,
                              hyper.l2, grad);
            adam_update(params, grad, state, hyper);
        }
        std::copy(params.begin(), params.end() - 1, weights.begin());
        std::vector<double> unused;
        model.epoch_loss.push_back(loss_and_gradient(
            weights, params.back(), standardized, labels, all_rows, hyper.l2, unused));
    }

    model.weights.assign(params.begin(), params.end() - 1);
    model.bias = params.back();
    for (double v : model.weights)
        if (!std::isfinite(v))
            throw StageError("train", "training diverged to non-finite weights");
    if (!std::isfinite(model.bias))
        throw StageError("train", "training diverged to non-finite bias");
    return model;
}

SegModel train_segmenter(const Raster& raster, const LabelMask& training_mask,
                         const SegHyper& hyper, int threads) {
    const FeatureMatrix raw = compute_features(raster, hyper.window_radius, threads);
    return train_segmenter_with_features(raw, raster, training_mask, hyper);
}

LabelMask predict_mask_with_features(const FeatureMatrix& raw_features,
                                     const Raster& raster, const SegModel& model,
                                     int threads) {
    if (model.bands != raster.bands)
        throw ConfigError("model expects " + std::to_string(model.bands) +
                          " bands, raster has " + std::to_string(raster.bands));
    if (raw_features.cols != model.weights.size() ||
        raw_features.rows != raster.plane())
        throw ConfigError("feature matrix does not match the model");

    LabelMask pred = make_mask(raster.width, raster.height, MaskKind::Predicted,
                               kNonCropland);
    const std::size_t dim = model.weights.size();
    parallel_for(raw_features.rows, threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> x(dim);
        for (std::size_t i = begin; i < end; ++i) {
            const double* src = raw_features.row_ptr(i);
            std::copy(src, src + dim, x.begin());
            apply_stats(model.feature_stats, x.data());
            double z = model.bias;
            for (std::size_t c = 0; c < dim; ++c) z += model.weights[c] * x[c];
            // p > 0.5 iff z > 0; the tie p = 0.5 stays non-cropland.
            pred.data[i] = z > 0.0 ? kCropland : kNonCropland;
        }
    });
    return pred;
}

LabelMask predict_mask(const Raster& raster, const SegModel& model, int threads) {
    const FeatureMatrix raw = compute_features(raster, model.window_radius, threads);
    return predict_mask_with_features(raw, raster, model, threads);
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
    return stats;
}

} // namespace

std::string seg_model_to_json(const SegModel& model) {
    json j = {{"weights", model.weights},
              {"bias", model.bias},
              {"window_radius", model.window_radius},
              {"bands", model.bands},
              {"feature_stats", stats_to_json(model.feature_stats)},
              {"epoch_loss", model.epoch_loss}};
    return j.dump(2) + "\n";
}

SegModel seg_model_from_json(const std::string& text) {
    SegModel model;
    try {
        const json j = json::parse(text);
        model.weights = j.at("weights").get<std::vector<double>>();
        model.bias = j.at("bias").get<double>();
        model.window_radius = j.at("window_radius").get<int>();
        model.bands = j.at("bands").get<int>();
        model.feature_stats = stats_from_json(j.at("feature_stats"));
        model.epoch_loss = j.value("epoch_loss", std::vector<double>{});
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad segmenter model: ") + e.what());
    }
    return model;
}

void save_seg_model(const SegModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out << seg_model_to_json(model);
}

SegModel load_seg_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("missing model file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return seg_model_from_json(text);
}

} // namespace cropmine
