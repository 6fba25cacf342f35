#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cropmine/error.hpp"
#include "cropmine/rng.hpp"
#include "cropmine/segmenter.hpp"

#include <cmath>
#include <numeric>

using namespace cropmine;

namespace {

Raster raster_of(int width, int height, int bands, std::vector<float> data) {
    Raster r;
    r.width = width;
    r.height = height;
    r.bands = bands;
    r.data = std::move(data);
    return r;
}

// Two well-separated blobs on a 32x32 single-band image: left half near 0,
// right half near 1. A plane at 0.5 separates them, which the test verifies
// before trusting the trained model.
struct ToyScene {
    Raster raster;
    LabelMask truth;
};

ToyScene toy_scene() {
    ToyScene toy;
    toy.raster = raster_of(32, 32, 1, std::vector<float>(1024));
    toy.truth = make_mask(32, 32, MaskKind::Truth, kNonCropland);
    Rng rng(17);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) {
            const bool crop = c >= 16;
            toy.raster.at(0, r, c) =
                static_cast<float>((crop ? 1.0 : 0.0) + 0.05 * rng.next_normal());
            if (crop) toy.truth.at(r, c) = kCropland;
        }
    return toy;
}

} // namespace

TEST_CASE("window radius zero keeps only the raw bands") {
    const Raster r = raster_of(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
    const FeatureMatrix f = compute_features(r, 0);
    CHECK(f.cols == 2);
    CHECK(f.at(0, 0) == 1.0);
    CHECK(f.at(0, 1) == 5.0);
    CHECK(f.at(3, 0) == 4.0);
    CHECK(f.at(3, 1) == 8.0);
}

TEST_CASE("window means on a constant image equal the center value") {
    const Raster r = raster_of(5, 4, 1, std::vector<float>(20, 3.5f));
    const FeatureMatrix f = compute_features(r, 1);
    CHECK(f.cols == 2);
    for (std::size_t i = 0; i < f.rows; ++i) {
        CHECK(f.at(i, 0) == 3.5);
        CHECK(f.at(i, 1) == doctest::Approx(3.5).epsilon(1e-12));
    }
}

TEST_CASE("3x3 window means with clamped edges") {
    const Raster r = raster_of(3, 3, 1, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const FeatureMatrix f = compute_features(r, 1);
    // Center pixel: mean of 1..9 = 5.
    CHECK(f.at(4, 1) == doctest::Approx(5.0));
    // Corner (0,0): clamped window repeats the border,
    // values 1,1,2 / 1,1,2 / 4,4,5 -> 21/9.
    CHECK(f.at(0, 1) == doctest::Approx(21.0 / 9.0));
}

TEST_CASE("features parallel mode matches the reference") {
    Rng rng(5);
    Raster r = raster_of(33, 17, 3, std::vector<float>(33 * 17 * 3));
    for (auto& v : r.data) v = static_cast<float>(rng.next_normal());
    const FeatureMatrix serial = compute_features(r, 1, 1);
    const FeatureMatrix parallel = compute_features(r, 1, 4);
    CHECK(serial.data == parallel.data);
}

TEST_CASE("zero parameters give ln 2 loss and logit gradient p - y") {
    FeatureMatrix f;
    f.rows = 1;
    f.cols = 2;
    f.data = {0.4, -1.7};
    const std::vector<std::uint8_t> labels = {1};
    std::vector<double> grad;
    const double loss = loss_and_gradient({0.0, 0.0}, 0.0, f, labels, {0}, 0.0, grad);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // Bias gradient is p - y = 0.5 - 1.
    CHECK(grad[2] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(grad[0] == doctest::Approx(-0.5 * 0.4).epsilon(1e-12));
}

TEST_CASE("mirrored balanced batch has zero bias gradient") {
    FeatureMatrix f;
    f.rows = 2;
    f.cols = 2;
    f.data = {0.7, -0.2, -0.7, 0.2};
    const std::vector<std::uint8_t> labels = {1, 0};
    std::vector<double> grad;
    loss_and_gradient({0.0, 0.0}, 0.0, f, labels, {0, 1}, 0.0, grad);
    CHECK(grad[2] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dim = 1 + rng.next_below(4);
        const std::size_t n = 2 + rng.next_below(10);
        FeatureMatrix f;
        f.rows = n;
        f.cols = dim;
        f.data.resize(n * dim);
        for (auto& v : f.data) v = rng.next_normal();
        std::vector<std::uint8_t> labels(n);
        for (auto& y : labels) y = static_cast<std::uint8_t>(rng.next_below(2));
        std::vector<double> weights(dim);
        for (auto& w : weights) w = rng.next_normal();
        double bias = rng.next_normal();
        const double l2 = trial % 2 == 0 ? 0.0 : 0.01;
        std::vector<std::size_t> rows(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});

        std::vector<double> grad;
        loss_and_gradient(weights, bias, f, labels, rows, l2, grad);

        const double h = 1e-5;
        std::vector<double> unused;
        for (std::size_t i = 0; i <= dim; ++i) {
            auto eval = [&](double delta) {
                std::vector<double> w = weights;
                double b = bias;
                if (i < dim)
                    w[i] += delta;
                else
                    b += delta;
                return loss_and_gradient(w, b, f, labels, rows, l2, unused);
            };
            const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
            const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-3});
            CHECK(std::abs(grad[i] - numeric) / denom < 1e-4);
        }
    }
}

TEST_CASE("first Adam step with gradient 4 moves by about -lr") {
    std::vector<double> params = {0.0};
    AdamState state;
    SegHyper hyper; // defaults: lr 1e-3, betas 0.9/0.999, eps 1e-8
    adam_update(params, {4.0}, state, hyper);
    CHECK(state.step == 1);
    // m_hat = 4, v_hat = 16, step = -lr * 4 / (4 + eps).
    const double expected = -1e-3 * 4.0 / (4.0 + 1e-8);
    CHECK(std::abs(params[0] - expected) <= 1e-15);
    CHECK(params[0] == doctest::Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("zero gradient with zero state changes nothing") {
    std::vector<double> params = {0.7, -0.3};
    AdamState state;
    SegHyper hyper;
    adam_update(params, {0.0, 0.0}, state, hyper);
    CHECK(params[0] == 0.7);
    CHECK(params[1] == -0.3);
}

TEST_CASE("successive Adam steps match the written-out recurrence") {
    SegHyper hyper;
    std::vector<double> params = {0.0};
    AdamState state;
    // Hand recurrence, written independently.
    double m = 0.0, v = 0.0, theta = 0.0;
    const double g = 2.5;
    for (int t = 1; t <= 5; ++t) {
        adam_update(params, {g}, state, hyper);
        m = hyper.beta1 * m + (1 - hyper.beta1) * g;
        v = hyper.beta2 * v + (1 - hyper.beta2) * g * g;
        const double m_hat = m / (1 - std::pow(hyper.beta1, t));
        const double v_hat = v / (1 - std::pow(hyper.beta2, t));
        theta -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
        CHECK(std::abs(params[0] - theta) <= 1e-12);
    }
}

TEST_CASE("adam rejects shape mismatches") {
    std::vector<double> params = {0.0, 0.0};
    AdamState state;
    SegHyper hyper;
    CHECK_THROWS_AS(adam_update(params, {1.0}, state, hyper), ConfigError);
}

TEST_CASE("the separable toy scene trains to high accuracy") {
    const ToyScene toy = toy_scene();

    // Separability oracle first: the closed-form plane value > 0.5 iff crop.
    std::size_t plane_correct = 0;
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) {
            const bool plane_crop = toy.raster.at(0, r, c) > 0.5f;
            plane_correct += plane_crop == (toy.truth.at(r, c) == kCropland);
        }
    REQUIRE(static_cast<double>(plane_correct) >= 0.99 * 1024);

    SegHyper hyper;
    hyper.seed = 3;
    const SegModel model = train_segmenter(toy.raster, toy.truth, hyper);
    const LabelMask pred = predict_mask(toy.raster, model);

    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        correct += pred.data[i] == toy.truth.data[i];
    CHECK(static_cast<double>(correct) >= 0.99 * 1024);

    // Training loss is non-increasing for at least 90% of epoch pairs.
    std::size_t non_increasing = 0;
    for (std::size_t e = 1; e < model.epoch_loss.size(); ++e)
        non_increasing += model.epoch_loss[e] <= model.epoch_loss[e - 1] + 1e-12;
    CHECK(static_cast<double>(non_increasing) >=
          0.9 * static_cast<double>(model.epoch_loss.size() - 1));
}

TEST_CASE("training only sees labeled pixels and is seed deterministic") {
    const ToyScene toy = toy_scene();
    LabelMask sparse = make_mask(32, 32, MaskKind::SparseHuman);
    Rng rng(9);
    for (std::size_t i = 0; i < sparse.size(); ++i)
        if (rng.next_double() < 0.25) sparse.data[i] = toy.truth.data[i];

    SegHyper hyper;
    hyper.seed = 11;
    const SegModel a = train_segmenter(toy.raster, sparse, hyper);
    const SegModel b = train_segmenter(toy.raster, sparse, hyper);
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);

    SegHyper other = hyper;
    other.seed = 12;
    const SegModel c = train_segmenter(toy.raster, sparse, other);
    CHECK(a.weights != c.weights);
}

TEST_CASE("unlearnable scenarios raise errors") {
    const ToyScene toy = toy_scene();
    const LabelMask empty = make_mask(32, 32, MaskKind::SparseHuman);
    CHECK_THROWS_AS(train_segmenter(toy.raster, empty, {}), StageError);

    LabelMask one_sided = make_mask(32, 32, MaskKind::SparseHuman);
    one_sided.data[0] = kCropland;
    one_sided.data[1] = kCropland;
    CHECK_THROWS_AS(train_segmenter(toy.raster, one_sided, {}), StageError);
}

TEST_CASE("prediction threshold and saturation behaviour") {
    const Raster r = raster_of(2, 1, 1, {0.3f, 0.9f});
    SegModel model;
    model.bands = 1;
    model.window_radius = 0;
    model.feature_stats = BandStats::identity(1);
    model.weights = {0.0};
    model.bias = 0.0; // p = 0.5 everywhere: the tie goes to non-cropland
    LabelMask pred = predict_mask(r, model);
    CHECK(pred.data == std::vector<std::uint8_t>{kNonCropland, kNonCropland});

    model.bias = 50.0; // saturated positive logit
    pred = predict_mask(r, model);
    CHECK(pred.data == std::vector<std::uint8_t>{kCropland, kCropland});
    for (std::uint8_t code : pred.data) CHECK(code != kUnknown);
}

TEST_CASE("prediction rejects band mismatches") {
    const Raster r = raster_of(2, 1, 2, {0.3f, 0.9f, 0.1f, 0.2f});
    SegModel model;
    model.bands = 1;
    model.window_radius = 0;
    model.feature_stats = BandStats::identity(1);
    model.weights = {1.0};
    CHECK_THROWS_AS(predict_mask(r, model), ConfigError);
}

TEST_CASE("segmenter model JSON round-trip") {
    const ToyScene toy = toy_scene();
    SegHyper hyper;
    hyper.epochs = 5;
    const SegModel model = train_segmenter(toy.raster, toy.truth, hyper);
    const SegModel back = seg_model_from_json(seg_model_to_json(model));
    CHECK(back.weights == model.weights);
    CHECK(back.bias == model.bias);
    CHECK(back.window_radius == model.window_radius);
    CHECK(back.feature_stats.mean == model.feature_stats.mean);

    const LabelMask a = predict_mask(toy.raster, model);
    const LabelMask b = predict_mask(toy.raster, back);
    CHECK(a.data == b.data);
}
