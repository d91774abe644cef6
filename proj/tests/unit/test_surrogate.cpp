#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "spinodoid/errors.hpp"
#include "spinodoid/surrogate.hpp"
#include "test_models.hpp"

using namespace spinodoid;
using spinodoid::testing::random_model;

namespace {

Eigen::VectorXd random_theta(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return (Eigen::VectorXd(4) << 0.3 + 0.7 * u(gen), 1.5 * u(gen), 1.5 * u(gen), 1.5 * u(gen)).finished();
}

// Smooth synthetic moduli so the fit problem is well posed.
Dataset synthetic_dataset(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Dataset d;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = random_theta(gen);
    OrthotropicNine y;
    for (int k = 0; k < 9; ++k) {
      y[k] = x[0] * x[0] * (0.5 + 0.1 * k) + 0.05 * std::sin(x[1 + k % 3] * (1 + k % 2)) * x[0];
    }
    d.inputs.push_back(x);
    d.outputs.push_back(y);
  }
  return d;
}

}  // namespace

TEST(Mlp, ZeroModelReturnsDenormalizedZero) {
  MlpModel m;
  m.norm.out_mean = Eigen::VectorXd::LinSpaced(9, 1.0, 9.0);
  m.norm.out_std = Eigen::VectorXd::Constant(9, 3.0);
  const Eigen::VectorXd y = m.forward(Eigen::Vector4d(0.5, 0.1, 0.2, 0.3));
  EXPECT_EQ(y, m.norm.out_mean);
}

TEST(Mlp, DefaultArchitecture) {
  const MlpModel m;
  EXPECT_EQ(m.dims(), (std::vector<int>{4, 128, 128, 64, 64, 32, 32, 9}));
  EXPECT_EQ(m.parameter_count(), 4u * 128 + 128 + 128 * 128 + 128 + 128 * 64 + 64 + 64 * 64 + 64 + 64 * 32 + 32 +
                                     32 * 32 + 32 + 32 * 9 + 9);
}

TEST(Mlp, ForwardDeterministicAndBatchConsistent) {
  const MlpModel m = random_model(MlpModel::default_dims(), 3);
  std::mt19937_64 gen(1);
  Eigen::MatrixXd x(4, 5);
  for (int j = 0; j < 5; ++j) x.col(j) = random_theta(gen);
  const Eigen::MatrixXd yb = m.forward_batch(x);
  for (int j = 0; j < 5; ++j) {
    const Eigen::VectorXd y1 = m.forward(x.col(j));
    EXPECT_EQ(y1, m.forward(x.col(j)));
    EXPECT_LT((yb.col(j) - y1).norm(), 1e-13 * (1 + y1.norm()));
  }
}

TEST(Mlp, LinearModelJacobianIsScaledWeights) {
  MlpModel m({4, 9});
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0, 1);
  for (Eigen::Index i = 0; i < m.layers[0].a.size(); ++i) m.layers[0].a.data()[i] = n(gen);
  m.norm.in_lo = Eigen::Vector4d(0.1, 0, 0, 0);
  m.norm.in_hi = Eigen::Vector4d(1.1, 2, 3, 4);
  m.norm.out_std = Eigen::VectorXd::LinSpaced(9, 0.5, 2.0);
  const Eigen::MatrixXd expected =
      m.norm.out_std.asDiagonal() * m.layers[0].a * Eigen::Vector4d(1.0, 0.5, 1.0 / 3, 0.25).asDiagonal();
  EXPECT_LT((m.input_jacobian(Eigen::Vector4d(0.5, 1, 1, 1)) - expected).norm(), 1e-14);
}

TEST(Mlp, JacobianMatchesCentralDifferences) {
  const MlpModel m = random_model(MlpModel::default_dims(), 7);
  std::mt19937_64 gen(4);
  const Eigen::VectorXd range = m.norm.in_hi - m.norm.in_lo;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = random_theta(gen);
    const Eigen::MatrixXd jac = m.input_jacobian(x);
    for (int j = 0; j < 4; ++j) {
      const double h = 1e-6 * range[j];
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Eigen::VectorXd fd = (m.forward(xp) - m.forward(xm)) / (2 * h);
      // Kink crossings show up as a mismatch between one-sided slopes.
      const Eigen::VectorXd right = (m.forward(xp) - m.forward(x)) / h;
      const Eigen::VectorXd left = (m.forward(x) - m.forward(xm)) / h;
      if ((right - left).norm() > 1e-4 * (1 + fd.norm())) continue;
      EXPECT_LT((jac.col(j) - fd).norm(), 1e-6 * (1 + fd.norm()));
      ++checked;
    }
  }
  EXPECT_GT(checked, 60);
}

TEST(Mlp, ForwardModeBatchMatchesReverseMode) {
  const MlpModel m = random_model(MlpModel::default_dims(), 9);
  std::mt19937_64 gen(6);
  Eigen::MatrixXd x(4, 7);
  for (int j = 0; j < 7; ++j) x.col(j) = random_theta(gen);
  Eigen::MatrixXd y;
  std::vector<Eigen::MatrixXd> jac;
  m.forward_batch_with_jacobian(x, &y, &jac);
  ASSERT_EQ(jac.size(), 4u);
  for (int s = 0; s < 7; ++s) {
    const Eigen::MatrixXd ref = m.input_jacobian(x.col(s));
    for (int j = 0; j < 4; ++j) EXPECT_LT((jac[j].col(s) - ref.col(j)).norm(), 1e-12 * (1 + ref.norm()));
  }
  EXPECT_EQ(m.input_jacobian(x.col(0)), m.input_jacobian(x.col(0)));
}

TEST(R2, PerfectAndMeanPredictors) {
  const Dataset d = synthetic_dataset(100, 1);
  // A model predicting exactly the mean of each output.
  OrthotropicNine mean = OrthotropicNine::Zero();
  for (const auto& y : d.outputs) mean += y;
  mean /= 100.0;
  const MlpModel mean_model = spinodoid::testing::constant_model(mean);
  const R2Result r0 = evaluate_r2(mean_model, d);
  for (int k = 0; k < 9; ++k) EXPECT_NEAR(r0.r2[k], 0.0, 1e-12);

  // Targets replaced by the model's own predictions.
  const MlpModel m = random_model({4, 16, 9}, 5);
  Dataset self = d;
  for (std::size_t i = 0; i < d.size(); ++i) self.outputs[i] = m.forward(d.inputs[i]);
  const R2Result r1 = evaluate_r2(m, self);
  for (int k = 0; k < 9; ++k) EXPECT_NEAR(r1.r2[k], 1.0, 1e-12);
}

TEST(Train, FitsSmoothData) {
  const Dataset d = synthetic_dataset(600, 2);
  TrainConfig cfg;
  cfg.dims = {4, 32, 32, 9};
  cfg.epochs = 150;
  cfg.seed = 3;
  cfg.void_anchor_fraction = 0.0;
  TrainReport rep;
  const MlpModel m = train_surrogate(d, cfg, &rep);
  EXPECT_EQ(rep.n_train + rep.n_validation, 600u);
  EXPECT_EQ(rep.n_validation, 60u);
  EXPECT_LT(rep.train_loss.back(), rep.train_loss.front());
  EXPECT_GT(rep.validation_r2.min_defined(), 0.97);
}

TEST(Train, IdenticalSamplesGiveConstant) {
  Dataset d;
  OrthotropicNine y = spinodoid::testing::isotropic_nine(0.3, 0.3);
  for (int i = 0; i < 64; ++i) {
    d.inputs.push_back(Eigen::Vector4d(0.5, 0.6, 0.7, 0.8));
    d.outputs.push_back(y);
  }
  TrainConfig cfg;
  cfg.dims = {4, 8, 9};
  cfg.epochs = 50;
  cfg.void_anchor_fraction = 0.0;
  TrainReport rep;
  const MlpModel m = train_surrogate(d, cfg, &rep);
  EXPECT_LT((m.forward(d.inputs[0]) - y).norm(), 1e-3 * y.norm());
  EXPECT_TRUE(rep.validation_r2.undefined[0]);
}

TEST(Train, SameSeedSameModel) {
  const Dataset d = synthetic_dataset(200, 4);
  TrainConfig cfg;
  cfg.dims = {4, 16, 9};
  cfg.epochs = 5;
  cfg.seed = 11;
  const Json a = model_to_json(train_surrogate(d, cfg));
  const Json b = model_to_json(train_surrogate(d, cfg));
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Train, VoidAnchorsPullLowDensityToZero) {
  const Dataset d = synthetic_dataset(400, 8);
  TrainConfig cfg;
  cfg.dims = {4, 32, 32, 9};
  cfg.epochs = 150;
  cfg.void_anchor_fraction = 0.2;
  TrainReport rep;
  const MlpModel m = train_surrogate(d, cfg, &rep);
  EXPECT_GT(rep.n_anchors, 0u);
  const Eigen::VectorXd y = m.forward(Eigen::Vector4d(0.01, 0.8, 0.8, 0.8));
  EXPECT_LT(y.norm(), 0.1 * m.forward(Eigen::Vector4d(0.9, 0.8, 0.8, 0.8)).norm());
}

TEST(Checkpoint, RoundTripIsExact) {
  const MlpModel m = random_model(MlpModel::default_dims(), 13);
  const auto path = std::filesystem::temp_directory_path() / "spinodoid_model.json";
  save_model(m, path);
  const MlpModel r = load_model(path);
  const Eigen::Vector4d x(0.45, 0.3, 1.1, 0.0);
  EXPECT_EQ(m.forward(x), r.forward(x));
}

TEST(Checkpoint, TruncatedAndMismatchedFilesRejected) {
  const MlpModel m = random_model({4, 16, 9}, 1);
  const auto path = std::filesystem::temp_directory_path() / "spinodoid_small.json";
  save_model(m, path);
  EXPECT_THROW(load_model(path), ParseError);  // default dims differ
  try {
    load_model(path);
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos);
  }
  EXPECT_NO_THROW(load_model(path, {4, 16, 9}));
  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  EXPECT_THROW(load_model(path, {4, 16, 9}), ParseError);
}

TEST(Split, DeterministicPartition) {
  const auto [a, b] = split_indices(100, 0.1, 5);
  EXPECT_EQ(a.size(), 90u);
  EXPECT_EQ(b.size(), 10u);
  std::vector<std::size_t> all(a);
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(split_indices(100, 0.1, 5).second, b);
}
