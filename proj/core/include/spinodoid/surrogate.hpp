#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "spinodoid/dataset.hpp"
#include "spinodoid/metadata.hpp"
#include "spinodoid/types.hpp"

namespace spinodoid {

struct DenseLayer {
  Eigen::MatrixXd a;  // out x in
  Eigen::VectorXd b;
};

// Input min-max scaling to [0, 1] and per-output standardization.
struct Normalization {
  Eigen::VectorXd in_lo, in_hi;
  Eigen::VectorXd out_mean, out_std;

  Eigen::VectorXd normalize_input(const Eigen::VectorXd& x) const;
  Eigen::VectorXd denormalize_input(const Eigen::VectorXd& z) const;
  Eigen::VectorXd normalize_output(const Eigen::VectorXd& y) const;
  Eigen::VectorXd denormalize_output(const Eigen::VectorXd& z) const;
};

// Fully connected ReLU network; no activation after the last layer.
class MlpModel {
 public:
  static const std::vector<int>& default_dims();  // 4-128-128-64-64-32-32-9

  MlpModel() : MlpModel(default_dims()) {}
  // Zero weights and identity normalization.
  explicit MlpModel(const std::vector<int>& dims);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }

  std::vector<DenseLayer> layers;
  Normalization norm;
  Json meta = Json::object();

  // Throws ConfigError on inconsistent shapes or non-positive scales.
  void validate() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // Columns are samples; physical units in and out.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;

  // Exact reverse-mode Jacobian d forward / d x (output x input), with
  // R'(0) = 0 for the ReLU.
  Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x) const;
  void forward_with_jacobian(const Eigen::VectorXd& x, Eigen::VectorXd* y, Eigen::MatrixXd* jac) const;

  // Batched forward-mode variant: (*jac)[j] holds d y / d x_j for every
  // sample column. Agrees with input_jacobian to rounding.
  void forward_batch_with_jacobian(const Eigen::MatrixXd& x, Eigen::MatrixXd* y,
                                   std::vector<Eigen::MatrixXd>* jac) const;

  std::size_t parameter_count() const;

 private:
  std::vector<int> dims_;
};

OrthotropicNine predict_moduli(const MlpModel& model, const Vector4d& theta);

struct TrainConfig {
  std::vector<int> dims = MlpModel::default_dims();
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 64;
  int epochs = 500;
  double validation_fraction = 0.1;
  // Void anchors: extra samples with rho in [0, void_rho_max], random angles,
  // and zero stiffness, as a fraction of the training split.
  double void_anchor_fraction = 0.1;
  double void_rho_max = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  Json to_json() const;
};

struct R2Result {
  Eigen::VectorXd r2;
  std::vector<bool> undefined;  // zero-variance component
  double min_defined() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // mean squared error, normalized outputs
  std::vector<double> validation_loss;
  R2Result validation_r2;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_anchors = 0;
};

// Deterministic split of `n` indices into (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double validation_fraction,
                                                                            std::uint64_t seed);

// Adam on the mean squared error of standardized outputs. Throws
// NumericalError if the loss becomes non-finite.
MlpModel train_surrogate(const Dataset& data, const TrainConfig& config, TrainReport* report = nullptr);

R2Result evaluate_r2(const MlpModel& model, const Dataset& test);

void save_model(const MlpModel& model, const std::filesystem::path& path);
// Throws ParseError on malformed content; when `expected_dims` is non-empty a
// checkpoint with other layer dims is rejected as a shape mismatch.
MlpModel load_model(const std::filesystem::path& path, const std::vector<int>& expected_dims = MlpModel::default_dims());
MlpModel model_from_json(const Json& doc, const std::vector<int>& expected_dims = MlpModel::default_dims());
Json model_to_json(const MlpModel& model);

}  // namespace spinodoid
