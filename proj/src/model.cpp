#include "gradspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gradspec/error.hpp"
#include "gradspec/random.hpp"

namespace gradspec {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t parameter_size(const Layer& layer) {
  return std::visit(Overloaded{[](const Linear& l) { return l.in * l.out + l.out; },
                               [](const ReLU&) { return std::size_t{0}; },
                               [](const BatchNorm& b) { return 2 * b.features; }},
                    layer);
}

// Per-layer values kept from the forward pass for the reverse pass.
struct Tape {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> xhat;
  std::vector<Eigen::VectorXd> inv_std;
};

}  // namespace

ToyModel::ToyModel(std::vector<Layer> layers, int classes, Eigen::VectorXd theta)
    : layers_(std::move(layers)), classes_(classes) {
  check_layers();
  if (static_cast<std::size_t>(theta.size()) != offsets_.back()) {
    throw ValidationError("theta length " + std::to_string(theta.size()) +
                          " does not match the parameter count " + std::to_string(offsets_.back()));
  }
  set_theta(std::move(theta));
}

ToyModel::ToyModel(std::vector<Layer> layers, int classes, std::uint64_t seed)
    : layers_(std::move(layers)), classes_(classes) {
  check_layers();
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offsets_.back()));
  Rng rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto off = static_cast<Eigen::Index>(offsets_[l]);
    if (const auto* lin = std::get_if<Linear>(&layers_[l])) {
      const double sd = std::sqrt(2.0 / static_cast<double>(lin->in));
      const auto count = static_cast<Eigen::Index>(lin->in * lin->out);
      for (Eigen::Index k = 0; k < count; ++k) theta_[off + k] = sd * normal(rng);
    } else if (const auto* bn = std::get_if<BatchNorm>(&layers_[l])) {
      theta_.segment(off, static_cast<Eigen::Index>(bn->features)).setOnes();
    }
  }
}

ToyModel ToyModel::mlp(std::size_t input, const std::vector<std::size_t>& hidden, int classes,
                       bool batch_norm, std::uint64_t seed) {
  std::vector<Layer> layers;
  std::size_t width = input;
  for (std::size_t h : hidden) {
    layers.emplace_back(Linear{width, h});
    if (batch_norm) layers.emplace_back(BatchNorm{h});
    layers.emplace_back(ReLU{});
    width = h;
  }
  layers.emplace_back(Linear{width, static_cast<std::size_t>(classes)});
  return ToyModel(std::move(layers), classes, seed);
}

void ToyModel::check_layers() {
  if (layers_.empty()) throw ValidationError("model needs at least one layer");
  if (classes_ < 2) throw ValidationError("model needs at least 2 classes");
  std::size_t width = 0;
  offsets_.assign(1, 0);
  for (const auto& layer : layers_) {
    std::visit(Overloaded{[&](const Linear& l) {
                            if (l.in == 0 || l.out == 0) throw ValidationError("empty Linear layer");
                            if (width != 0 && l.in != width) {
                              throw ValidationError("Linear input width does not chain");
                            }
                            if (width == 0) input_dim_ = l.in;
                            width = l.out;
                          },
                          [&](const ReLU&) {
                            if (width == 0) throw ValidationError("model cannot start with ReLU");
                          },
                          [&](const BatchNorm& b) {
                            if (b.features == 0) throw ValidationError("empty BatchNorm layer");
                            if (width != 0 && b.features != width) {
                              throw ValidationError("BatchNorm width does not chain");
                            }
                            if (width == 0) input_dim_ = b.features;
                            width = b.features;
                          }},
               layer);
    offsets_.push_back(offsets_.back() + parameter_size(layer));
  }
  if (width != static_cast<std::size_t>(classes_)) {
    throw ValidationError("final layer width must equal the class count");
  }
}

void ToyModel::set_theta(Eigen::VectorXd theta) {
  if (static_cast<std::size_t>(theta.size()) != offsets_.back()) {
    throw ValidationError("theta has the wrong length");
  }
  theta_ = std::move(theta);
}

bool ToyModel::has_batchnorm() const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return std::holds_alternative<BatchNorm>(l); });
}

namespace {

Eigen::MatrixXd run_forward(const std::vector<Layer>& layers, const std::vector<std::size_t>& offsets,
                            const Eigen::VectorXd& theta, const std::vector<Eigen::VectorXd>* frozen_mean,
                            const std::vector<Eigen::VectorXd>* frozen_inv, Eigen::MatrixXd a,
                            Tape* tape, std::vector<Eigen::VectorXd>* collect_mean,
                            std::vector<Eigen::VectorXd>* collect_inv) {
  const Eigen::Index batch = a.cols();
  std::size_t bn_index = 0;
  if (tape) {
    tape->inputs.assign(layers.size(), {});
    tape->xhat.assign(layers.size(), {});
    tape->inv_std.assign(layers.size(), {});
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (tape) tape->inputs[l] = a;
    const double* p = theta.data() + offsets[l];
    if (const auto* lin = std::get_if<Linear>(&layers[l])) {
      const auto in = static_cast<Eigen::Index>(lin->in), out = static_cast<Eigen::Index>(lin->out);
      Eigen::Map<const Eigen::MatrixXd> w(p, out, in);
      Eigen::Map<const Eigen::VectorXd> b(p + out * in, out);
      a = ((w * a).colwise() + b).eval();
    } else if (std::holds_alternative<ReLU>(layers[l])) {
      a = a.cwiseMax(0.0);
    } else {
      const auto f = static_cast<Eigen::Index>(std::get<BatchNorm>(layers[l]).features);
      Eigen::Map<const Eigen::VectorXd> gamma(p, f), beta(p + f, f);
      Eigen::VectorXd mean, inv;
      if (frozen_mean) {
        mean = (*frozen_mean)[bn_index];
        inv = (*frozen_inv)[bn_index];
      } else {
        if (batch < 2) throw ValidationError("BatchNorm needs a batch of at least 2 samples");
        mean = a.rowwise().mean();
        const Eigen::VectorXd var = (a.colwise() - mean).array().square().rowwise().mean();
        inv = (var.array() + kBatchNormEpsilon).rsqrt();
        if (collect_mean) {
          collect_mean->push_back(mean);
          collect_inv->push_back(inv);
        }
      }
      Eigen::MatrixXd xhat = inv.asDiagonal() * (a.colwise() - mean);
      a = ((gamma.asDiagonal() * xhat).colwise() + beta).eval();
      if (tape) {
        tape->xhat[l] = std::move(xhat);
        tape->inv_std[l] = std::move(inv);
      }
      ++bn_index;
    }
  }
  return a;
}

// Mean cross-entropy; optionally the gradient with respect to the logits.
double cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels,
                     Eigen::MatrixXd* dlogits) {
  const Eigen::Index batch = logits.cols();
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw ValidationError("label count does not match the batch");
  }
  double total = 0.0;
  if (dlogits) dlogits->resize(logits.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= logits.rows()) throw ValidationError("label out of range");
    const double top = logits.col(j).maxCoeff();
    const Eigen::VectorXd e = (logits.col(j).array() - top).exp();
    const double sum = e.sum();
    total += top + std::log(sum) - logits(y, j);
    if (dlogits) {
      dlogits->col(j) = e / sum;
      (*dlogits)(y, j) -= 1.0;
    }
  }
  if (dlogits) *dlogits /= static_cast<double>(batch);
  return total / static_cast<double>(batch);
}

}  // namespace

void ToyModel::freeze_batchnorm(const ToyDataset& ds) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  FrozenStats stats;
  run_forward(layers_, offsets_, theta_, nullptr, nullptr, gather_inputs(ds, all), nullptr,
              &stats.mean, &stats.inv_std);
  frozen_ = std::move(stats);
}

Eigen::MatrixXd ToyModel::logits(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim_) {
    throw ValidationError("input dimension does not match the model");
  }
  return run_forward(layers_, offsets_, theta_, frozen_ ? &frozen_->mean : nullptr,
                     frozen_ ? &frozen_->inv_std : nullptr, inputs, nullptr, nullptr, nullptr);
}

double ToyModel::loss(const Eigen::MatrixXd& inputs, std::span<const int> labels) const {
  return cross_entropy(logits(inputs), labels, nullptr);
}

ToyModel::LossGradient ToyModel::loss_and_gradient(const Eigen::MatrixXd& inputs,
                                                   std::span<const int> labels) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim_) {
    throw ValidationError("input dimension does not match the model");
  }
  if (inputs.cols() == 0) throw ValidationError("empty batch");
  Tape tape;
  const Eigen::MatrixXd z =
      run_forward(layers_, offsets_, theta_, frozen_ ? &frozen_->mean : nullptr,
                  frozen_ ? &frozen_->inv_std : nullptr, inputs, &tape, nullptr, nullptr);
  Eigen::MatrixXd delta;
  LossGradient out;
  out.loss = cross_entropy(z, labels, &delta);
  out.gradient = Eigen::VectorXd::Zero(theta_.size());
  const double batch = static_cast<double>(inputs.cols());

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto off = static_cast<Eigen::Index>(offsets_[l]);
    const double* p = theta_.data() + off;
    const Eigen::MatrixXd& a_in = tape.inputs[l];
    if (const auto* lin = std::get_if<Linear>(&layers_[l])) {
      const auto in = static_cast<Eigen::Index>(lin->in), outw = static_cast<Eigen::Index>(lin->out);
      Eigen::Map<const Eigen::MatrixXd> w(p, outw, in);
      Eigen::Map<Eigen::MatrixXd> dw(out.gradient.data() + off, outw, in);
      dw = delta * a_in.transpose();
      out.gradient.segment(off + outw * in, outw) = delta.rowwise().sum();
      if (l > 0) delta = (w.transpose() * delta).eval();
    } else if (std::holds_alternative<ReLU>(layers_[l])) {
      delta = (a_in.array() > 0.0).select(delta, 0.0);
    } else {
      const auto f = static_cast<Eigen::Index>(std::get<BatchNorm>(layers_[l]).features);
      Eigen::Map<const Eigen::VectorXd> gamma(p, f);
      const Eigen::MatrixXd& xhat = tape.xhat[l];
      out.gradient.segment(off, f) = (delta.cwiseProduct(xhat)).rowwise().sum();
      out.gradient.segment(off + f, f) = delta.rowwise().sum();
      const Eigen::MatrixXd dxhat = gamma.asDiagonal() * delta;
      const Eigen::VectorXd& inv = tape.inv_std[l];
      if (frozen_) {
        delta = inv.asDiagonal() * dxhat;
      } else {
        const Eigen::VectorXd sum_d = dxhat.rowwise().sum();
        const Eigen::VectorXd sum_dx = dxhat.cwiseProduct(xhat).rowwise().sum();
        Eigen::MatrixXd dx = batch * dxhat;
        dx.colwise() -= sum_d;
        dx -= sum_dx.asDiagonal() * xhat;
        delta = (inv / batch).asDiagonal() * dx;
      }
    }
  }
  return out;
}

Eigen::MatrixXd gather_inputs(const ToyDataset& ds, std::span<const std::size_t> indices) {
  Eigen::MatrixXd x(ds.inputs.cols(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= ds.size()) throw ValidationError("sample index out of range");
    x.col(static_cast<Eigen::Index>(j)) = ds.inputs.row(static_cast<Eigen::Index>(indices[j])).transpose();
  }
  return x;
}

std::vector<int> gather_labels(const ToyDataset& ds, std::span<const std::size_t> indices) {
  std::vector<int> y(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) y[j] = ds.labels.at(indices[j]);
  return y;
}

Eigen::VectorXd model_grad(const ToyModel& model, const ToyDataset& ds,
                           std::span<const std::size_t> batch) {
  if (batch.empty()) throw ValidationError("model_grad: empty batch");
  if (ds.dim() != model.input_dim()) throw ValidationError("model_grad: dataset dimension mismatch");
  const auto labels = gather_labels(ds, batch);
  return model.loss_and_gradient(gather_inputs(ds, batch), labels).gradient;
}

namespace {
std::vector<std::size_t> all_indices(const ToyDataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}
}  // namespace

double full_loss(const ToyModel& model, const ToyDataset& ds) {
  const auto idx = all_indices(ds);
  return model.loss(gather_inputs(ds, idx), ds.labels);
}

Eigen::VectorXd full_gradient(const ToyModel& model, const ToyDataset& ds) {
  return model_grad(model, ds, all_indices(ds));
}

double accuracy(const ToyModel& model, const ToyDataset& ds) {
  const Eigen::MatrixXd z = model.logits(gather_inputs(ds, all_indices(ds)));
  std::size_t correct = 0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    Eigen::Index arg = 0;
    z.col(j).maxCoeff(&arg);
    if (arg == ds.labels[static_cast<std::size_t>(j)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

ToyModel pretrain(const ToyModel& model, const ToyDataset& ds, std::size_t epochs, double eta,
                  std::size_t batch, std::uint64_t seed) {
  validate(ds);
  if (batch < 1 || batch > ds.size()) throw ValidationError("pretrain: batch size must be in [1, N]");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw ValidationError("pretrain: eta must be finite and >= 0");
  ToyModel trained = model;
  const std::size_t min_batch = model.has_batchnorm() && !model.batchnorm_frozen() ? 2 : 1;
  Rng rng(seed);
  auto order = all_indices(ds);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      if (len < min_batch) continue;
      const std::span<const std::size_t> idx(order.data() + start, len);
      const auto labels = gather_labels(ds, idx);
      const auto lg = trained.loss_and_gradient(gather_inputs(ds, idx), labels);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        throw NumericalError("pretrain diverged (non-finite loss)");
      }
      trained.set_theta(trained.theta() - eta * lg.gradient);
    }
  }
  if (!std::isfinite(full_loss(trained, ds))) throw NumericalError("pretrain diverged (non-finite loss)");
  return trained;
}

Eigen::MatrixXd hessian_fd_raw(const GradientFn& gradient, const Eigen::VectorXd& at, double h) {
  const Eigen::Index n = at.size();
  if (static_cast<std::size_t>(n) > kMaxHessianDimension) {
    throw ValidationError("hessian_fd: n exceeds " + std::to_string(kMaxHessianDimension));
  }
  if (!(h > 0.0)) throw ValidationError("hessian_fd: step must be positive");
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd x = at;
  for (Eigen::Index j = 0; j < n; ++j) {
    x[j] = at[j] + h;
    const Eigen::VectorXd plus = gradient(x);
    x[j] = at[j] - h;
    const Eigen::VectorXd minus = gradient(x);
    x[j] = at[j];
    hess.col(j) = (plus - minus) / (2.0 * h);
  }
  if (!hess.allFinite()) throw NumericalError("hessian_fd: non-finite entries");
  return hess;
}

Eigen::MatrixXd hessian_fd(const GradientFn& gradient, const Eigen::VectorXd& at, double h) {
  const Eigen::MatrixXd raw = hessian_fd_raw(gradient, at, h);
  return 0.5 * (raw + raw.transpose());
}

Eigen::MatrixXd hessian_fd(const ToyModel& model, const ToyDataset& ds, double h) {
  if (model.has_batchnorm() && !model.batchnorm_frozen()) {
    throw ValidationError("hessian_fd: freeze BatchNorm statistics first");
  }
  if (model.parameter_count() > kMaxHessianDimension) {
    throw ValidationError("hessian_fd: n exceeds " + std::to_string(kMaxHessianDimension));
  }
  ToyModel probe = model;
  return hessian_fd(
      [&](const Eigen::VectorXd& theta) {
        probe.set_theta(theta);
        return full_gradient(probe, ds);
      },
      model.theta(), h);
}

}  // namespace gradspec
