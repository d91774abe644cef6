#include "spinodoid/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spinodoid/errors.hpp"
#include "spinodoid/rng.hpp"

namespace spinodoid {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

// 1 where z > 0; the ReLU derivative at exactly zero is taken as zero.
Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

Eigen::MatrixXd columns(const std::vector<Vector4d>& xs, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd m(4, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) m.col(j) = xs[idx[j]];
  return m;
}

Eigen::MatrixXd columns(const std::vector<OrthotropicNine>& ys, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd m(9, idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) m.col(j) = ys[idx[j]];
  return m;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& what) {
  throw ParseError("model checkpoint: field '" + field + "' " + what);
}

const Json& require(const Json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) bad_field(path + key, "is missing");
  return obj.at(key);
}

Eigen::VectorXd read_vector(const Json& j, const std::string& field, Eigen::Index expected) {
  if (!j.is_array()) bad_field(field, "is not an array");
  if (static_cast<Eigen::Index>(j.size()) != expected) {
    throw ParseError("model checkpoint: shape mismatch in '" + field + "': expected " + std::to_string(expected) +
                     " entries, got " + std::to_string(j.size()));
  }
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    if (!j[i].is_number()) bad_field(field + "[" + std::to_string(i) + "]", "is not a number");
    v[i] = j[i].get<double>();
  }
  return v;
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

Eigen::VectorXd Normalization::normalize_input(const Eigen::VectorXd& x) const {
  return (x - in_lo).cwiseQuotient(in_hi - in_lo);
}
Eigen::VectorXd Normalization::denormalize_input(const Eigen::VectorXd& z) const {
  return in_lo + z.cwiseProduct(in_hi - in_lo);
}
Eigen::VectorXd Normalization::normalize_output(const Eigen::VectorXd& y) const {
  return (y - out_mean).cwiseQuotient(out_std);
}
Eigen::VectorXd Normalization::denormalize_output(const Eigen::VectorXd& z) const {
  return out_mean + z.cwiseProduct(out_std);
}

const std::vector<int>& MlpModel::default_dims() {
  static const std::vector<int> dims{4, 128, 128, 64, 64, 32, 32, 9};
  return dims;
}

MlpModel::MlpModel(const std::vector<int>& dims) : dims_(dims) {
  if (dims_.size() < 2) throw ConfigError("mlp: need at least an input and an output layer");
  for (int d : dims_) {
    if (d < 1) throw ConfigError("mlp: layer widths must be positive");
  }
  for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
    layers.push_back({Eigen::MatrixXd::Zero(dims_[k + 1], dims_[k]), Eigen::VectorXd::Zero(dims_[k + 1])});
  }
  norm.in_lo = Eigen::VectorXd::Zero(input_dim());
  norm.in_hi = Eigen::VectorXd::Ones(input_dim());
  norm.out_mean = Eigen::VectorXd::Zero(output_dim());
  norm.out_std = Eigen::VectorXd::Ones(output_dim());
}

void MlpModel::validate() const {
  if (layers.size() + 1 != dims_.size()) throw ConfigError("mlp: layer count does not match dims");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].a.rows() != dims_[k + 1] || layers[k].a.cols() != dims_[k] || layers[k].b.size() != dims_[k + 1]) {
      throw ConfigError("mlp: layer " + std::to_string(k) + " has inconsistent shape");
    }
  }
  if (norm.in_lo.size() != input_dim() || norm.in_hi.size() != input_dim() || norm.out_mean.size() != output_dim() ||
      norm.out_std.size() != output_dim()) {
    throw ConfigError("mlp: normalization sizes do not match dims");
  }
  if (((norm.in_hi - norm.in_lo).array() <= 0.0).any() || (norm.out_std.array() <= 0.0).any()) {
    throw ConfigError("mlp: normalization scales must be positive");
  }
}

Eigen::MatrixXd MlpModel::forward_batch(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = (x.colwise() - norm.in_lo).array().colwise() / (norm.in_hi - norm.in_lo).array();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::MatrixXd z = layers[k].a * h;
    z.colwise() += layers[k].b;
    h = k + 1 < layers.size() ? relu(z) : z;
  }
  return (h.array().colwise() * norm.out_std.array()).colwise() + norm.out_mean.array();
}

Eigen::VectorXd MlpModel::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y;
  forward_with_jacobian(x, &y, nullptr);
  return y;
}

Eigen::MatrixXd MlpModel::input_jacobian(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd jac;
  forward_with_jacobian(x, nullptr, &jac);
  return jac;
}

void MlpModel::forward_with_jacobian(const Eigen::VectorXd& x, Eigen::VectorXd* y, Eigen::MatrixXd* jac) const {
  if (x.size() != input_dim()) throw ConfigError("mlp: input has wrong dimension");
  std::vector<Eigen::VectorXd> masks;
  masks.reserve(layers.size());
  Eigen::VectorXd h = norm.normalize_input(x);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::VectorXd z = layers[k].a * h + layers[k].b;
    if (k + 1 < layers.size()) {
      masks.push_back(relu_mask(z));
      h = z.cwiseMax(0.0);
    } else {
      h = z;
    }
  }
  if (y) *y = norm.denormalize_output(h);
  if (!jac) return;
  // Reverse sweep carrying all output adjoints at once.
  Eigen::MatrixXd g = norm.out_std.asDiagonal() * layers.back().a;
  for (std::size_t k = layers.size() - 1; k-- > 0;) {
    g = (g * masks[k].asDiagonal()) * layers[k].a;
  }
  *jac = g * (norm.in_hi - norm.in_lo).cwiseInverse().asDiagonal();
}

void MlpModel::forward_batch_with_jacobian(const Eigen::MatrixXd& x, Eigen::MatrixXd* y,
                                           std::vector<Eigen::MatrixXd>* jac) const {
  if (x.rows() != input_dim()) throw ConfigError("mlp: input has wrong dimension");
  const Eigen::VectorXd inv_range = (norm.in_hi - norm.in_lo).cwiseInverse();
  Eigen::MatrixXd h = (x.colwise() - norm.in_lo).array().colwise() * inv_range.array();
  const int n_in = input_dim();
  std::vector<Eigen::MatrixXd> tangents;
  if (jac) {
    for (int j = 0; j < n_in; ++j) {
      tangents.emplace_back(Eigen::MatrixXd::Zero(n_in, x.cols()));
      tangents[j].row(j).setConstant(inv_range[j]);
    }
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::MatrixXd z = layers[k].a * h;
    z.colwise() += layers[k].b;
    const bool hidden = k + 1 < layers.size();
    const Eigen::MatrixXd mask = hidden ? relu_mask(z) : Eigen::MatrixXd();
    for (auto& t : tangents) {
      t = layers[k].a * t;
      if (hidden) t = t.cwiseProduct(mask);
    }
    h = hidden ? relu(z) : z;
  }
  if (y) *y = (h.array().colwise() * norm.out_std.array()).colwise() + norm.out_mean.array();
  if (jac) {
    for (auto& t : tangents) t = t.array().colwise() * norm.out_std.array();
    *jac = std::move(tangents);
  }
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.a.size() + l.b.size();
  return n;
}

OrthotropicNine predict_moduli(const MlpModel& model, const Vector4d& theta) {
  return model.forward(theta);
}

void TrainConfig::validate() const {
  if (dims.size() < 2 || dims.front() != 4 || dims.back() != 9) {
    throw ConfigError("train: network must map 4 inputs to 9 outputs");
  }
  if (!(learning_rate > 0.0) || !(adam_epsilon > 0.0)) throw ConfigError("train: rates must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: Adam moment coefficients must lie in (0, 1)");
  }
  if (batch_size < 1 || epochs < 0) throw ConfigError("train: batch size must be positive and epochs non-negative");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("train: validation fraction must lie in (0, 1)");
  }
  if (!(void_anchor_fraction >= 0.0) || !(void_rho_max >= 0.0 && void_rho_max < 1.0)) {
    throw ConfigError("train: invalid void anchor settings");
  }
}

Json TrainConfig::to_json() const {
  return Json{{"dims", dims},
              {"learning_rate", learning_rate},
              {"beta1", beta1},
              {"beta2", beta2},
              {"adam_epsilon", adam_epsilon},
              {"batch_size", batch_size},
              {"epochs", epochs},
              {"validation_fraction", validation_fraction},
              {"void_anchor_fraction", void_anchor_fraction},
              {"void_rho_max", void_rho_max},
              {"seed", seed}};
}

double R2Result::min_defined() const {
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < r2.size(); ++k) {
    if (!undefined[k]) m = std::min(m, r2[k]);
  }
  return m;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double validation_fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0));
  shuffle(idx, rng);
  auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  else n_val = 0;
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return {train, val};
}

MlpModel train_surrogate(const Dataset& data, const TrainConfig& config, TrainReport* report) {
  config.validate();
  if (data.size() == 0) throw ConfigError("train: dataset is empty");
  auto [train_idx, val_idx] = split_indices(data.size(), config.validation_fraction, config.seed);

  // Training table: real samples followed by void anchors.
  std::vector<Vector4d> xs;
  std::vector<OrthotropicNine> ys;
  for (std::size_t i : train_idx) {
    xs.push_back(data.inputs[i]);
    ys.push_back(data.outputs[i]);
  }
  const auto n_anchor = static_cast<std::size_t>(std::llround(config.void_anchor_fraction * train_idx.size()));
  Rng anchor_rng(derive_seed(config.seed, 2));
  for (std::size_t a = 0; a < n_anchor; ++a) {
    Vector4d x;
    x[0] = anchor_rng.uniform(0.0, config.void_rho_max);
    for (int k = 1; k < 4; ++k) x[k] = anchor_rng.uniform(0.0, kPi / 2.0);
    xs.push_back(x);
    ys.push_back(OrthotropicNine::Zero());
  }
  const std::size_t n = xs.size();

  MlpModel model(config.dims);
  Eigen::MatrixXd x_all(4, n), y_all(9, n);
  for (std::size_t i = 0; i < n; ++i) {
    x_all.col(i) = xs[i];
    y_all.col(i) = ys[i];
  }
  model.norm.in_lo = x_all.rowwise().minCoeff();
  model.norm.in_hi = x_all.rowwise().maxCoeff();
  for (int k = 0; k < 4; ++k) {
    if (!(model.norm.in_hi[k] > model.norm.in_lo[k])) model.norm.in_hi[k] = model.norm.in_lo[k] + 1.0;
  }
  model.norm.out_mean = y_all.rowwise().mean();
  const Eigen::MatrixXd centered = y_all.colwise() - model.norm.out_mean;
  model.norm.out_std = (centered.rowwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (int k = 0; k < 9; ++k) {
    if (!(model.norm.out_std[k] > 1e-12)) model.norm.out_std[k] = 1.0;
  }

  Rng init_rng(derive_seed(config.seed, 1));
  for (auto& layer : model.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.a.cols()));
    for (Eigen::Index j = 0; j < layer.a.cols(); ++j)
      for (Eigen::Index i = 0; i < layer.a.rows(); ++i) layer.a(i, j) = init_rng.uniform(-limit, limit);
    layer.b.setZero();
  }

  // Normalized training targets.
  const Eigen::MatrixXd xn = (x_all.colwise() - model.norm.in_lo).array().colwise() /
                             (model.norm.in_hi - model.norm.in_lo).array();
  const Eigen::MatrixXd yn = (y_all.colwise() - model.norm.out_mean).array().colwise() / model.norm.out_std.array();

  const std::size_t n_layers = model.layers.size();
  std::vector<Eigen::MatrixXd> m_a(n_layers), v_a(n_layers);
  std::vector<Eigen::VectorXd> m_b(n_layers), v_b(n_layers);
  for (std::size_t k = 0; k < n_layers; ++k) {
    m_a[k] = v_a[k] = Eigen::MatrixXd::Zero(model.layers[k].a.rows(), model.layers[k].a.cols());
    m_b[k] = v_b[k] = Eigen::VectorXd::Zero(model.layers[k].b.size());
  }

  const Eigen::MatrixXd x_val = columns(data.inputs, val_idx);
  const Eigen::MatrixXd y_val = columns(data.outputs, val_idx);
  auto validation_loss = [&]() {
    if (val_idx.empty()) return 0.0;
    const Eigen::MatrixXd pred = model.forward_batch(x_val);
    const Eigen::MatrixXd diff = (pred - y_val).array().colwise() / model.norm.out_std.array();
    return diff.squaredNorm() / static_cast<double>(diff.size());
  };

  TrainReport rep;
  rep.n_train = train_idx.size();
  rep.n_validation = val_idx.size();
  rep.n_anchors = n_anchor;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::vector<Eigen::MatrixXd> hs(n_layers + 1), zs(n_layers);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, 3, static_cast<std::uint64_t>(epoch)));
    shuffle(order, shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t bs = std::min<std::size_t>(config.batch_size, n - start);
      hs[0].resize(4, bs);
      Eigen::MatrixXd target(9, bs);
      for (std::size_t j = 0; j < bs; ++j) {
        hs[0].col(j) = xn.col(order[start + j]);
        target.col(j) = yn.col(order[start + j]);
      }
      for (std::size_t k = 0; k < n_layers; ++k) {
        zs[k] = model.layers[k].a * hs[k];
        zs[k].colwise() += model.layers[k].b;
        hs[k + 1] = k + 1 < n_layers ? relu(zs[k]) : zs[k];
      }
      Eigen::MatrixXd delta = hs[n_layers] - target;
      const double batch_loss = delta.squaredNorm() / static_cast<double>(delta.size());
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("train: loss diverged (non-finite) at epoch " + std::to_string(epoch) + ", batch starting " +
                             std::to_string(start) + "; try a smaller learning rate");
      }
      epoch_loss += batch_loss * static_cast<double>(bs);
      delta *= 2.0 / static_cast<double>(delta.size());
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t k = n_layers; k-- > 0;) {
        const Eigen::MatrixXd ga = delta * hs[k].transpose();
        const Eigen::VectorXd gb = delta.rowwise().sum();
        if (k > 0) delta = (model.layers[k].a.transpose() * delta).cwiseProduct(relu_mask(zs[k - 1]));
        m_a[k] = config.beta1 * m_a[k] + (1.0 - config.beta1) * ga;
        v_a[k] = config.beta2 * v_a[k] + (1.0 - config.beta2) * ga.cwiseAbs2();
        m_b[k] = config.beta1 * m_b[k] + (1.0 - config.beta1) * gb;
        v_b[k] = config.beta2 * v_b[k] + (1.0 - config.beta2) * gb.cwiseAbs2();
        model.layers[k].a.array() -=
            config.learning_rate * (m_a[k].array() / c1) / ((v_a[k].array() / c2).sqrt() + config.adam_epsilon);
        model.layers[k].b.array() -=
            config.learning_rate * (m_b[k].array() / c1) / ((v_b[k].array() / c2).sqrt() + config.adam_epsilon);
      }
    }
    rep.train_loss.push_back(epoch_loss / static_cast<double>(n));
    rep.validation_loss.push_back(validation_loss());
  }

  model.meta = Json{{"train", config.to_json()},
                    {"n_train", rep.n_train},
                    {"n_validation", rep.n_validation},
                    {"n_void_anchors", rep.n_anchors}};
  if (!val_idx.empty()) {
    Dataset val;
    for (std::size_t i : val_idx) {
      val.inputs.push_back(data.inputs[i]);
      val.outputs.push_back(data.outputs[i]);
    }
    rep.validation_r2 = evaluate_r2(model, val);
    model.meta["validation_r2"] = vector_json(rep.validation_r2.r2);
  }
  if (report) *report = std::move(rep);
  return model;
}

R2Result evaluate_r2(const MlpModel& model, const Dataset& test) {
  if (test.size() == 0) throw ConfigError("evaluate_r2: test set is empty");
  std::vector<std::size_t> all(test.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Eigen::MatrixXd y = columns(test.outputs, all);
  const Eigen::MatrixXd pred = model.forward_batch(columns(test.inputs, all));
  R2Result out;
  out.r2 = Eigen::VectorXd::Zero(9);
  out.undefined.assign(9, false);
  for (int k = 0; k < 9; ++k) {
    const double mean = y.row(k).mean();
    const double ss_tot = (y.row(k).array() - mean).square().sum();
    const double ss_res = (y.row(k) - pred.row(k)).squaredNorm();
    // Constant targets up to rounding leave R^2 undefined.
    if (ss_tot <= 1e-24 * static_cast<double>(y.cols()) * std::max(1.0, mean * mean)) {
      out.undefined[k] = true;
      out.r2[k] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.r2[k] = 1.0 - ss_res / ss_tot;
    }
  }
  return out;
}

Json model_to_json(const MlpModel& model) {
  model.validate();
  Json layers = Json::array();
  for (const auto& l : model.layers) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < l.a.rows(); ++i) rows.push_back(vector_json(l.a.row(i).transpose()));
    layers.push_back({{"A", rows}, {"b", vector_json(l.b)}});
  }
  return Json{{"format", "spinodoid-mlp"},
              {"dims", model.dims()},
              {"activation", "relu"},
              {"layers", layers},
              {"norm",
               {{"in_lo", vector_json(model.norm.in_lo)},
                {"in_hi", vector_json(model.norm.in_hi)},
                {"out_mean", vector_json(model.norm.out_mean)},
                {"out_std", vector_json(model.norm.out_std)}}},
              {"meta", model.meta}};
}

MlpModel model_from_json(const Json& doc, const std::vector<int>& expected_dims) {
  const Json& dims_j = require(doc, "dims", "");
  std::vector<int> dims;
  if (!dims_j.is_array()) bad_field("dims", "is not an array");
  for (const auto& d : dims_j) {
    if (!d.is_number_integer()) bad_field("dims", "must contain integers");
    dims.push_back(d.get<int>());
  }
  if (!expected_dims.empty() && dims != expected_dims) {
    std::string got, want;
    for (int d : dims) got += (got.empty() ? "" : "-") + std::to_string(d);
    for (int d : expected_dims) want += (want.empty() ? "" : "-") + std::to_string(d);
    throw ParseError("model checkpoint: shape mismatch in 'dims': expected " + want + ", got " + got);
  }
  MlpModel model = [&]() {
    try {
      return MlpModel(dims);
    } catch (const ConfigError& e) {
      throw ParseError(std::string("model checkpoint: field 'dims': ") + e.what());
    }
  }();
  const Json& layers = require(doc, "layers", "");
  if (!layers.is_array() || layers.size() != model.layers.size()) {
    throw ParseError("model checkpoint: shape mismatch in 'layers': expected " + std::to_string(model.layers.size()) +
                     " layers");
  }
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const std::string base = "layers[" + std::to_string(k) + "].";
    const Json& a = require(layers[k], "A", base);
    auto& layer = model.layers[k];
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != layer.a.rows()) {
      throw ParseError("model checkpoint: shape mismatch in '" + base + "A': expected " +
                       std::to_string(layer.a.rows()) + " rows");
    }
    for (Eigen::Index i = 0; i < layer.a.rows(); ++i) {
      layer.a.row(i) = read_vector(a[i], base + "A[" + std::to_string(i) + "]", layer.a.cols()).transpose();
    }
    layer.b = read_vector(require(layers[k], "b", base), base + "b", layer.b.size());
  }
  const Json& norm = require(doc, "norm", "");
  model.norm.in_lo = read_vector(require(norm, "in_lo", "norm."), "norm.in_lo", model.input_dim());
  model.norm.in_hi = read_vector(require(norm, "in_hi", "norm."), "norm.in_hi", model.input_dim());
  model.norm.out_mean = read_vector(require(norm, "out_mean", "norm."), "norm.out_mean", model.output_dim());
  model.norm.out_std = read_vector(require(norm, "out_std", "norm."), "norm.out_std", model.output_dim());
  if (doc.contains("meta")) model.meta = doc.at("meta");
  try {
    model.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("model checkpoint: ") + e.what());
  }
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) { write_json_file(path, model_to_json(model)); }

MlpModel load_model(const std::filesystem::path& path, const std::vector<int>& expected_dims) {
  return model_from_json(read_json_file(path), expected_dims);
}

}  // namespace spinodoid
