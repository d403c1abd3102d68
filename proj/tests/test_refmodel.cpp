#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "segadv/errors.hpp"
#include "segadv/refmodel.hpp"

using namespace segadv;
using namespace segadv::model;
using segadv::testing::quick_model;
using segadv::testing::random_model;
using segadv::testing::small_dataset;

TEST_SUITE("refmodel") {

TEST_CASE("predict: pixel probabilities sum to one") {
  const ModelParams m = random_model(3);
  const auto& sample = small_dataset().val.front();
  const ProbabilityMap probs = predict(m, sample.image);
  CHECK(probs.classes() == 4);
  for (std::size_t p = 0; p < probs.pixels(); ++p) {
    double s = 0.0;
    for (float v : probs.pixel(p)) s += v;
    CHECK(std::fabs(s - 1.0) <= 1e-6);
  }
  CHECK(predict(m, sample.image) == probs);
}

TEST_CASE("predict: zero head gives uniform probabilities") {
  const ModelParams m = init_params(4, 5, {}, InitOptions{.zero_head = true});
  const ProbabilityMap probs = predict(m, small_dataset().val.front().image);
  for (float v : probs.tensor().values()) CHECK(v == 0.25f);
}

TEST_CASE("predict rejects non-finite or mis-shaped input") {
  const ModelParams m = random_model();
  Tensor bad = small_dataset().val.front().image;
  bad[7] = std::nanf("");
  CHECK_THROWS_AS(predict(m, bad), InputError);
  CHECK_THROWS_AS(predict(m, Tensor({8, 8, 2})), InputError);
}

TEST_CASE("loss_input_grad: zero weights give zero gradient") {
  const auto& s = small_dataset().val.front();
  const LossGrad r = loss_input_grad(random_model(), s.image, s.labels, uniform_weights(64, 64, 0.0f));
  CHECK(r.loss == 0.0);
  for (float g : r.grad.values()) CHECK(g == 0.0f);
}

TEST_CASE("loss_input_grad: doubling the weights doubles loss and gradient exactly") {
  const auto& s = small_dataset().val[1];
  const ModelParams m = random_model(4);
  const LossGrad one = loss_input_grad(m, s.image, s.labels, uniform_weights(64, 64, 0.75f));
  const LossGrad two = loss_input_grad(m, s.image, s.labels, uniform_weights(64, 64, 1.5f));
  CHECK(two.loss == 2.0 * one.loss);
  for (std::size_t k = 0; k < one.grad.size(); ++k) CHECK(two.grad[k] == 2.0f * one.grad[k]);
}

TEST_CASE("loss on the model's own prediction is positive") {
  const auto& s = small_dataset().val[2];
  const LabelMap pred = predict_labels(quick_model(), s.image);
  CHECK(loss_input_grad(quick_model(), s.image, pred, uniform_weights(64, 64)).loss > 0.0);
}

TEST_CASE("train: zero learning rate keeps the initialization") {
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.seed = 17;
  const auto& train_set = small_dataset().train;
  const ModelParams trained = model::train(std::span(train_set).first(16), 4, cfg);
  CHECK(trained == init_params(4, 17, cfg.norm));
}

TEST_CASE("train: fixed seed is bit-reproducible") {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 23;
  const auto subset = std::span(small_dataset().train).first(16);
  CHECK(model::train(subset, 4, cfg) == model::train(subset, 4, cfg));
}

TEST_CASE("train: diverging run reports the epoch") {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 1e12;
  try {
    model::train(std::span(small_dataset().train).first(8), 4, cfg);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("train improves pixel accuracy") {
  const double before = pixel_accuracy(random_model(21), small_dataset().val);
  const double after = pixel_accuracy(quick_model(), small_dataset().val);
  CHECK(after > before);
  CHECK(after > 0.8);
}

TEST_CASE("grad_check: zero-weight loss") {
  const auto& s = small_dataset().val[3];
  GradCheckOptions opts;
  opts.samples = 40;
  const CheckReport r = grad_check(random_model(), s.image, s.labels, uniform_weights(64, 64, 0.0f), opts);
  CHECK(r.passed);
  for (const auto& e : r.entries) {
    CHECK(e.analytic == 0.0);
    CHECK(std::fabs(e.numeric) < 1e-12);
  }
}

TEST_CASE("grad_check passes on a trained model") {
  const auto& s = small_dataset().val[4];
  const CheckReport r = grad_check(quick_model(), s.image, s.labels, uniform_weights(64, 64));
  CHECK(r.entries.size() == 200);
  CHECK(r.passed);
}

TEST_CASE("grad_check fails when one layer's backward is scaled by two") {
  const auto& s = small_dataset().val[4];
  const ModelParams& m = quick_model();
  const auto corrupted = [&](const Tensor& image) {
    ForwardGraph g = build_graph(m, image, s.labels, uniform_weights(64, 64), true, false);
    g.tape.scale_gradient(g.conv2, 2.0f);
    g.tape.backward({g.loss});
    return g.tape.grad(g.image);
  };
  GradCheckOptions opts;
  opts.samples = 100;
  const CheckReport r = grad_check(m, s.image, s.labels, uniform_weights(64, 64), opts, corrupted);
  CHECK_FALSE(r.passed);
  CHECK(r.median_rel_error > 0.1);
}

TEST_CASE("checkpoint round trip") {
  segadv::testing::TempDir dir("ckpt");
  save_checkpoint(dir.path(), quick_model());
  CHECK(load_checkpoint(dir.path()) == quick_model());
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing"), IoError);
}

}  // TEST_SUITE
