#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gradspec/dataset.hpp"
#include "gradspec/error.hpp"
#include "gradspec/model.hpp"
#include "gradspec/record.hpp"
#include "gradspec/spectrum.hpp"
#include "gradspec/transform.hpp"
#include "oracles.hpp"

namespace gradspec {
namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Zero-initialized biases can put a whole sample exactly on a ReLU kink;
// checks are run at a jittered, generic point instead.
void jitter(ToyModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.1);
  Eigen::VectorXd theta = model.theta();
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += normal(rng);
  model.set_theta(theta);
}

// Central differences of the scalar loss, one coordinate at a time.
Eigen::VectorXd fd_gradient(const ToyModel& model, const Eigen::MatrixXd& x, const std::vector<int>& y,
                            double h) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(model.parameter_count()));
  ToyModel probe = model;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    Eigen::VectorXd theta = model.theta();
    theta(j) += h;
    probe.set_theta(theta);
    const double up = probe.loss(x, y);
    theta(j) -= 2 * h;
    probe.set_theta(theta);
    const double down = probe.loss(x, y);
    g(j) = (up - down) / (2 * h);
  }
  return g;
}

std::vector<Layer> random_layers(std::mt19937_64& rng, std::size_t input, int classes) {
  std::uniform_int_distribution<int> depth(1, 3), width(2, 9), coin(0, 1);
  std::vector<Layer> layers;
  std::size_t w = input;
  const int hidden = depth(rng);
  for (int l = 0; l < hidden; ++l) {
    const auto out = static_cast<std::size_t>(width(rng));
    layers.emplace_back(Linear{w, out});
    if (coin(rng)) layers.emplace_back(BatchNorm{out});
    layers.emplace_back(ReLU{});
    w = out;
  }
  if (coin(rng)) layers.emplace_back(BatchNorm{w});
  layers.emplace_back(Linear{w, static_cast<std::size_t>(classes)});
  return layers;
}

TEST(ModelGradient, MatchesFiniteDifferencesAcrossConfigurations) {
  std::mt19937_64 rng(2024);
  int with_batchnorm = 0;
  for (int config = 0; config < 20; ++config) {
    const int classes = 2 + config % 4;
    const std::size_t dim = 2 + static_cast<std::size_t>(config % 5);
    ToyModel model(random_layers(rng, dim, classes), classes, 100 + static_cast<std::uint64_t>(config));
    jitter(model, static_cast<std::uint64_t>(config));
    ASSERT_LE(model.parameter_count(), 500u);
    if (model.has_batchnorm()) ++with_batchnorm;
    const auto ds = make_blobs(classes, dim, 12, 1.5, 300 + static_cast<std::uint64_t>(config));
    const auto idx = all_indices(ds.size());
    const Eigen::MatrixXd x = gather_inputs(ds, idx);
    const auto y = gather_labels(ds, idx);
    const auto analytic = model.loss_and_gradient(x, y);
    EXPECT_NEAR(analytic.loss, model.loss(x, y), 1e-12);
    const Eigen::VectorXd numeric = fd_gradient(model, x, y, 1e-5);
    const double scale = analytic.gradient.cwiseAbs().maxCoeff();
    const double err = (analytic.gradient - numeric).cwiseAbs().maxCoeff() / scale;
    std::string shape;
    for (const auto& l : model.layers()) shape += l.index() == 0 ? "L" : l.index() == 1 ? "R" : "B";
    EXPECT_LE(err, 1e-5) << "config " << config << " " << shape << " n=" << model.parameter_count();
  }
  EXPECT_GE(with_batchnorm, 5);
}

TEST(ModelGradient, ThreeLayerReluModel) {
  const auto ds = make_blobs(3, 6, 40, 2.0, 9);
  auto model = ToyModel::mlp(6, {16, 12}, 3, false, 4);
  jitter(model, 1);
  const auto idx = all_indices(ds.size());
  const Eigen::MatrixXd x = gather_inputs(ds, idx);
  const auto y = gather_labels(ds, idx);
  const Eigen::VectorXd g = model_grad(model, ds, idx);
  const Eigen::VectorXd fd = fd_gradient(model, x, y, 1e-5);
  EXPECT_LE((g - fd).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff(), 1e-5);
}

TEST(ModelGradient, ZeroWeightLinearModel) {
  const int c = 4;
  const std::size_t d = 3;
  ToyModel model({Linear{d, static_cast<std::size_t>(c)}}, c, Eigen::VectorXd::Zero(16));
  const auto ds = make_blobs(c, d, 8, 1.0, 5);
  const auto idx = all_indices(ds.size());
  const auto lg = model.loss_and_gradient(gather_inputs(ds, idx), gather_labels(ds, idx));
  EXPECT_NEAR(lg.loss, std::log(4.0), 1e-14);
  // dL/dW = mean over samples of (1/c - onehot) x^T; dL/db = mean of (1/c - onehot)
  Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(c, static_cast<Eigen::Index>(d));
  Eigen::VectorXd db = Eigen::VectorXd::Zero(c);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    Eigen::VectorXd r = Eigen::VectorXd::Constant(c, 1.0 / c);
    r(ds.labels[i]) -= 1.0;
    dw += r * ds.inputs.row(static_cast<Eigen::Index>(i)) / 8.0;
    db += r / 8.0;
  }
  const Eigen::VectorXd expect = (Eigen::VectorXd(16) << dw.reshaped(), db).finished();
  EXPECT_LT((lg.gradient - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ModelGradient, FullBatchIsWeightedMeanOfMinibatches) {
  const auto ds = make_blobs(3, 4, 30, 2.0, 6);
  const auto model = ToyModel::mlp(4, {8}, 3, false, 1);
  const Eigen::VectorXd full = full_gradient(model, ds);
  const std::vector<std::vector<std::size_t>> parts = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9, 10, 11, 12, 13, 14},
                                                       {15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29}};
  Eigen::VectorXd combined = Eigen::VectorXd::Zero(full.size());
  for (const auto& p : parts) combined += static_cast<double>(p.size()) / 30.0 * model_grad(model, ds, p);
  EXPECT_LT((combined - full).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ModelGradient, Errors) {
  const auto ds = make_blobs(3, 4, 30, 2.0, 6);
  const auto bn = ToyModel::mlp(4, {8}, 3, true, 1);
  EXPECT_THROW(model_grad(bn, ds, std::vector<std::size_t>{2}), ValidationError);
  EXPECT_NO_THROW(model_grad(bn, ds, std::vector<std::size_t>{2, 3}));
  const auto wrong = ToyModel::mlp(5, {8}, 3, false, 1);
  EXPECT_THROW(model_grad(wrong, ds, std::vector<std::size_t>{0, 1}), ValidationError);
  EXPECT_THROW(ToyModel({Linear{4, 8}, Linear{7, 3}}, 3, 1), ValidationError);
  EXPECT_THROW(ToyModel({Linear{4, 8}}, 3, 1), ValidationError);
}

TEST(ModelInit, HeScaling) {
  ToyModel model({Linear{400, 300}, ReLU{}, Linear{300, 2}}, 2, 3);
  const Eigen::VectorXd& th = model.theta();
  const auto w = th.head(400 * 300);
  const double var = w.squaredNorm() / static_cast<double>(w.size());
  EXPECT_NEAR(var, 2.0 / 400.0, 0.02 * 2.0 / 400.0);
  EXPECT_EQ(th.segment(400 * 300, 300).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pretrain, SeparableBlobs) {
  const auto ds = make_blobs(4, 5, 400, 6.0, 2);
  const auto model = ToyModel::mlp(5, {16}, 4, false, 3);
  const auto trained = pretrain(model, ds, 30, 0.1, 16, 4);
  EXPECT_GE(accuracy(trained, ds), 0.95);
  EXPECT_LT(full_loss(trained, ds), full_loss(model, ds));
  EXPECT_EQ(pretrain(model, ds, 5, 0.0, 16, 4).theta(), model.theta());
  EXPECT_EQ(pretrain(model, ds, 3, 0.1, 16, 9).theta(), pretrain(model, ds, 3, 0.1, 16, 9).theta());
}

TEST(Pretrain, DivergenceIsReported) {
  const auto ds = make_blobs(2, 3, 40, 50.0, 2);
  const auto model = ToyModel::mlp(3, {8}, 2, false, 3);
  EXPECT_THROW(pretrain(model, ds, 50, 1e12, 4, 1), NumericalError);
}

TEST(Hessian, QuadraticIsExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd r(12, 12);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = normal(rng);
  const QuadraticObjective q{r * r.transpose() + Eigen::MatrixXd::Identity(12, 12), 1.0};
  const Eigen::VectorXd at = Eigen::VectorXd::LinSpaced(12, -1, 1);
  const Eigen::MatrixXd h = hessian_fd([&](const Eigen::VectorXd& th) { return q.gradient(th); }, at, 1e-4);
  EXPECT_LT((h - q.A).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Hessian, ModelAsymmetryAndSymmetrization) {
  const auto ds = make_blobs(3, 4, 60, 2.0, 6);
  const auto model = ToyModel::mlp(4, {6}, 3, false, 1);
  const GradientFn grad = [&](const Eigen::VectorXd& th) {
    ToyModel m = model;
    m.set_theta(th);
    return full_gradient(m, ds);
  };
  const Eigen::MatrixXd raw = hessian_fd_raw(grad, model.theta(), 1e-4);
  EXPECT_LE((raw - raw.transpose()).cwiseAbs().maxCoeff(), 1e-4 * raw.cwiseAbs().maxCoeff());
  const Eigen::MatrixXd h = hessian_fd(model, ds, 1e-4);
  EXPECT_EQ((h - h.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((h - 0.5 * (raw + raw.transpose())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Hessian, LinearSoftmaxIsPositiveSemidefinite) {
  const auto ds = make_blobs(3, 4, 120, 3.0, 7);
  const ToyModel linear({Linear{4, 3}}, 3, 2);
  const auto trained = pretrain(linear, ds, 20, 0.1, 8, 3);
  const Eigen::MatrixXd h = hessian_fd(trained, ds, 1e-4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  EXPECT_GT(es.eigenvalues().maxCoeff(), 0.0);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6 * es.eigenvalues().maxCoeff());
}

TEST(Hessian, BatchNormNeedsFrozenStatistics) {
  const auto ds = make_blobs(3, 4, 60, 2.0, 6);
  auto model = ToyModel::mlp(4, {6}, 3, true, 1);
  EXPECT_THROW(hessian_fd(model, ds, 1e-4), ValidationError);
  model.freeze_batchnorm(ds);
  EXPECT_TRUE(model.batchnorm_frozen());
  const Eigen::MatrixXd h = hessian_fd(model, ds, 1e-4);
  EXPECT_EQ(h.rows(), static_cast<Eigen::Index>(model.parameter_count()));
  EXPECT_TRUE(h.allFinite());
  // frozen statistics make single-sample batches legal
  EXPECT_NO_THROW(model_grad(model, ds, std::vector<std::size_t>{0}));
}

TEST(Hessian, FrozenBatchNormGradientMatchesFiniteDifferences) {
  const auto ds = make_blobs(3, 4, 40, 2.0, 8);
  auto model = ToyModel::mlp(4, {7}, 3, true, 2);
  jitter(model, 2);
  model.freeze_batchnorm(ds);
  const auto idx = std::vector<std::size_t>{0, 3, 7};
  const Eigen::MatrixXd x = gather_inputs(ds, idx);
  const auto y = gather_labels(ds, idx);
  const Eigen::VectorXd g = model.loss_and_gradient(x, y).gradient;
  const Eigen::VectorXd fd = fd_gradient(model, x, y, 1e-5);
  EXPECT_LE((g - fd).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff(), 1e-5);
}

TEST(DrawBatch, Modes) {
  Rng rng(1);
  EXPECT_EQ(draw_batch(5, 5, false, rng), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  for (int i = 0; i < 50; ++i) {
    const auto b = draw_batch(20, 7, false, rng);
    EXPECT_EQ(std::set<std::size_t>(b.begin(), b.end()).size(), 7u);
    EXPECT_TRUE(std::is_sorted(b.begin(), b.end()));
    EXPECT_LT(b.back(), 20u);
  }
  EXPECT_THROW(draw_batch(5, 6, false, rng), ValidationError);
  EXPECT_THROW(draw_batch(5, 0, true, rng), ValidationError);
}

class RecordTrace : public ::testing::Test {
 protected:
  ToyDataset ds = make_blobs(3, 4, 50, 2.0, 5);
  ToyModel model = ToyModel::mlp(4, {8}, 3, false, 6);
};

TEST_F(RecordTrace, FirstColumnReplaysSource) {
  const Eigen::VectorXd before = model.theta();
  const auto g = record_trace(model, ds, 4, 10, false, GradientTransform::identity(), 77);
  EXPECT_EQ(model.theta(), before);
  EXPECT_EQ(g.n(), model.parameter_count());
  EXPECT_EQ(g.T(), 10u);
  EXPECT_EQ(g.batch_size(), 4u);
  Rng rng(77);
  const auto batch = draw_batch(ds.size(), 4, false, rng);
  const Eigen::VectorXd expect = model_grad(model, ds, batch);
  const auto col = g.column(0).values;
  for (Eigen::Index i = 0; i < expect.size(); ++i) EXPECT_EQ(col[static_cast<std::size_t>(i)], expect(i));
  EXPECT_EQ(encode_trace(g), encode_trace(record_trace(model, ds, 4, 10, false, GradientTransform::identity(), 77)));
}

TEST_F(RecordTrace, FullBatchHasZeroCovariance) {
  const auto g = record_trace(model, ds, ds.size(), 8, false, GradientTransform::identity(), 3);
  const Eigen::VectorXd full = full_gradient(model, ds);
  for (std::size_t t = 0; t < g.T(); ++t)
    EXPECT_LT((g.values().col(static_cast<Eigen::Index>(t)) - full).cwiseAbs().maxCoeff(), 1e-15);
  const auto spec = covariance_spectrum(g, true);
  for (double v : spec.eigenvalues()) EXPECT_EQ(v, 0.0);
}

TEST_F(RecordTrace, Transforms) {
  const auto base = record_trace(model, ds, 2, 12, true, GradientTransform::identity(), 5);
  const auto clip = record_trace(model, ds, 2, 12, true, GradientTransform::parse("clip:inf"), 5);
  const auto mom0 = record_trace(model, ds, 2, 12, true, GradientTransform::momentum(0.0), 5);
  const auto adam = record_trace(model, ds, 2, 12, true, GradientTransform::adam(0.9, 0.999), 5);
  EXPECT_EQ(clip.values(), base.values());
  EXPECT_EQ(mom0.values(), base.values());
  EXPECT_NE(adam.values(), base.values());
  EXPECT_EQ(adam.meta()["transform"], GradientTransform::adam(0.9, 0.999).describe());
  EXPECT_THROW(record_trace(model, ds, 51, 2, false, GradientTransform::identity(), 1), ValidationError);
}

TEST(Transform, Semantics) {
  Eigen::VectorXd g(2), theta(2);
  g << 3.0, 4.0;
  theta << 1.0, -1.0;
  auto clip = GradientTransform::clip(1.0);
  EXPECT_NEAR(clip.apply(g, theta).norm(), 1.0, 1e-15);
  auto wd = GradientTransform::weight_decay(0.5);
  EXPECT_EQ(wd.apply(g, theta), (Eigen::VectorXd(2) << 3.5, 3.5).finished());
  auto mom = GradientTransform::momentum(0.5);
  mom.apply(g, theta);
  EXPECT_EQ(mom.apply(g, theta), 1.5 * g);
  auto adam = GradientTransform::adam(0.9, 0.999, 1e-8);
  const Eigen::VectorXd first = adam.apply(g, theta);
  EXPECT_NEAR(first(0), 1.0, 1e-8);
  EXPECT_NEAR(first(1), 1.0, 1e-8);
  adam.reset();
  EXPECT_EQ(adam.apply(g, theta), first);
  EXPECT_THROW(GradientTransform::parse("bogus"), ValidationError);
  EXPECT_THROW(GradientTransform::parse("clip"), ValidationError);
  EXPECT_EQ(GradientTransform::parse("momentum:0.9").kind(), GradientTransform::Kind::Momentum);
  EXPECT_EQ(GradientTransform::parse("adam").describe(), GradientTransform::adam(0.9, 0.999, 1e-8).describe());
  EXPECT_EQ(GradientTransform::parse("adam:0.8").describe(), GradientTransform::adam(0.8, 0.999, 1e-8).describe());
  EXPECT_EQ(GradientTransform::parse(GradientTransform::weight_decay(1e-4).describe()).describe(),
            GradientTransform::weight_decay(1e-4).describe());
}

TEST(QuadraticTrace, NoiseScalesWithBatch) {
  const QuadraticObjective q{Eigen::MatrixXd::Identity(30, 30) * 2.0, 1.5};
  const Eigen::VectorXd theta = Eigen::VectorXd::Ones(30);
  const auto g1 = record_quadratic_trace(q, theta, 1, 4000, 3);
  const auto g4 = record_quadratic_trace(q, theta, 4, 4000, 3);
  const auto m1 = estimate_moments(g1, true), m4 = estimate_moments(g4, true);
  EXPECT_NEAR(m1.trace_cov, 30 * 2.25, 0.05 * 30 * 2.25);
  EXPECT_NEAR(m4.trace_cov * 4, m1.trace_cov, 1e-9 * m1.trace_cov);
  EXPECT_LT((m1.mean - 2.0 * theta).cwiseAbs().maxCoeff(), 0.1);
}

}  // namespace
}  // namespace gradspec
