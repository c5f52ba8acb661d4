#pragma once

// Minimal dense network engine: PReLU multilayer perceptrons over Eigen
// matrices with hand-written reverse mode and ADAM. Batches are rows.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ncp/errors.hpp"
#include "ncp/rng.hpp"

namespace ncp {

/// Affine layers in_dim -> hidden[0] -> ... -> hidden.back() -> out_dim with
/// a PReLU (one learnable slope per layer) after every hidden layer and no
/// activation on the output.
struct MlpSpec {
  int in_dim = 1;
  int out_dim = 1;
  std::vector<int> hidden;

  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  int layer_in(int l) const { return l == 0 ? in_dim : hidden[static_cast<std::size_t>(l) - 1]; }
  int layer_out(int l) const {
    return l + 1 == num_layers() ? out_dim : hidden[static_cast<std::size_t>(l)];
  }
  bool has_activation(int l) const { return l + 1 < num_layers(); }
  std::size_t param_count() const;
  /// Offset of layer l's weight block in the flat parameter vector; the
  /// bias follows the weights, then the slope (hidden layers only).
  std::size_t layer_offset(int l) const;

  void validate() const;
  /// "in hidden... out" e.g. "2 128 128 256".
  std::string to_string() const;
  static MlpSpec parse(const std::string& text);

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

inline constexpr double kInitialSlope = 0.25;

template <typename Scalar>
class Mlp;

/// Activations recorded by a forward pass, sufficient for backward.
template <typename Scalar>
struct MlpCache {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Mat> inputs;  // input to each affine layer
  std::vector<Mat> pre;     // pre-activation of each hidden layer
  const Mlp<Scalar>* owner = nullptr;
  std::uint64_t generation = 0;
};

template <typename Scalar = double>
class Mlp {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Mlp() = default;
  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    params_ = Vec::Zero(static_cast<Eigen::Index>(spec_.param_count()));
  }

  Mlp(const Mlp& other) : spec_(other.spec_), params_(other.params_) {}
  Mlp& operator=(const Mlp& other) {
    spec_ = other.spec_;
    params_ = other.params_;
    ++generation_;
    return *this;
  }

  const MlpSpec& spec() const { return spec_; }
  const Vec& params() const { return params_; }
  /// Mutable access invalidates outstanding caches.
  Vec& mutable_params() {
    ++generation_;
    return params_;
  }

  Eigen::Map<const Mat> weight(int l) const {
    return {params_.data() + spec_.layer_offset(l), spec_.layer_out(l), spec_.layer_in(l)};
  }
  Eigen::Map<const Vec> bias(int l) const {
    return {params_.data() + spec_.layer_offset(l) + weight_size(l), spec_.layer_out(l)};
  }
  Scalar slope(int l) const { return params_(slope_index(l)); }

  Eigen::Index slope_index(int l) const {
    return static_cast<Eigen::Index>(spec_.layer_offset(l) + weight_size(l) +
                                     static_cast<std::size_t>(spec_.layer_out(l)));
  }

  /// Inference pass, batch x in_dim -> batch x out_dim.
  Mat forward(const Eigen::Ref<const Mat>& x) const {
    check_input(x);
    Mat a = x;
    for (int l = 0; l < spec_.num_layers(); ++l) {
      Mat z = affine(l, a);
      if (spec_.has_activation(l)) prelu_inplace(z, slope(l));
      a = std::move(z);
    }
    return a;
  }

  /// Training pass recording the activations backward() needs.
  Mat forward(const Eigen::Ref<const Mat>& x, MlpCache<Scalar>& cache) const {
    check_input(x);
    const int layers = spec_.num_layers();
    cache.inputs.resize(static_cast<std::size_t>(layers));
    cache.pre.resize(static_cast<std::size_t>(layers - 1));
    cache.owner = this;
    cache.generation = generation_;
    cache.inputs[0] = x;
    for (int l = 0; l < layers; ++l) {
      Mat z = affine(l, cache.inputs[static_cast<std::size_t>(l)]);
      if (!spec_.has_activation(l)) return z;
      cache.pre[static_cast<std::size_t>(l)] = z;
      prelu_inplace(z, slope(l));
      cache.inputs[static_cast<std::size_t>(l) + 1] = std::move(z);
    }
    return {};
  }

  /// Accumulates parameter gradients into `grad` (flat, same layout as the
  /// parameters) and returns the gradient with respect to the input. The
  /// PReLU derivative at exactly zero takes the positive branch.
  Mat backward(const MlpCache<Scalar>& cache, const Eigen::Ref<const Mat>& upstream,
               Eigen::Ref<Vec> grad) const {
    if (cache.owner != this || cache.generation != generation_) {
      throw std::logic_error("Mlp::backward: stale or foreign cache");
    }
    if (grad.size() != params_.size()) throw ConfigError("Mlp::backward: gradient size mismatch");
    const auto batch = cache.inputs[0].rows();
    if (upstream.rows() != batch || upstream.cols() != spec_.out_dim) {
      throw ConfigError("Mlp::backward: upstream shape mismatch");
    }
    Mat delta = upstream;
    for (int l = spec_.num_layers() - 1; l >= 0; --l) {
      const auto& x = cache.inputs[static_cast<std::size_t>(l)];
      const std::size_t off = spec_.layer_offset(l);
      Eigen::Map<Mat> d_weight(grad.data() + off, spec_.layer_out(l), spec_.layer_in(l));
      Eigen::Map<Vec> d_bias(grad.data() + off + weight_size(l), spec_.layer_out(l));
      d_weight.noalias() += delta.transpose() * x;
      d_bias += delta.colwise().sum().transpose();
      Mat d_input = delta * weight(l);
      if (l > 0) {
        // Back through the PReLU that produced this layer's input.
        const auto& z = cache.pre[static_cast<std::size_t>(l) - 1];
        const Scalar s = slope(l - 1);
        Scalar d_slope = 0;
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
          for (Eigen::Index i = 0; i < z.rows(); ++i) {
            if (z(i, j) < 0) {
              d_slope += d_input(i, j) * z(i, j);
              d_input(i, j) *= s;
            }
          }
        }
        grad(slope_index(l - 1)) += d_slope;
      }
      delta = std::move(d_input);
    }
    return delta;
  }

 private:
  std::size_t weight_size(int l) const {
    return static_cast<std::size_t>(spec_.layer_out(l)) * static_cast<std::size_t>(spec_.layer_in(l));
  }

  Mat affine(int l, const Eigen::Ref<const Mat>& x) const {
    Mat z(x.rows(), spec_.layer_out(l));
    z.noalias() = x * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    return z;
  }

  static void prelu_inplace(Mat& z, Scalar s) {
    z = z.unaryExpr([s](Scalar v) { return v < 0 ? s * v : v; });
  }

  void check_input(const Eigen::Ref<const Mat>& x) const {
    if (x.cols() != spec_.in_dim) {
      throw ConfigError("Mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                        std::to_string(spec_.in_dim));
    }
  }

  MlpSpec spec_;
  Vec params_;
  std::uint64_t generation_ = 0;
};

/// He-style initialization: weights ~ N(0, 2 / fan_in), zero biases, PReLU
/// slopes at kInitialSlope.
template <typename Scalar>
void init_params(Mlp<Scalar>& net, Stream& rng) {
  const MlpSpec& spec = net.spec();
  auto& p = net.mutable_params();
  p.setZero();
  for (int l = 0; l < spec.num_layers(); ++l) {
    const double stddev = std::sqrt(2.0 / spec.layer_in(l));
    const std::size_t off = spec.layer_offset(l);
    const std::size_t count =
        static_cast<std::size_t>(spec.layer_out(l)) * static_cast<std::size_t>(spec.layer_in(l));
    for (std::size_t i = 0; i < count; ++i) {
      p(static_cast<Eigen::Index>(off + i)) = static_cast<Scalar>(rng.normal(0.0, stddev));
    }
    if (spec.has_activation(l)) p(net.slope_index(l)) = static_cast<Scalar>(kInitialSlope);
  }
}

/// Piecewise-constant step size: lrs[i] applies while step <= breakpoints[i],
/// lrs.back() afterwards. Defaults: 1e-4 up to step 1000, then 1e-5.
struct LrSchedule {
  std::vector<std::int64_t> breakpoints{1000};
  std::vector<double> lrs{1e-4, 1e-5};

  double at(std::int64_t step) const;
  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LrSchedule schedule;
};

template <typename Scalar = double>
struct AdamState {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  std::int64_t step = 0;
  Vec first_moment;
  Vec second_moment;

  AdamState() = default;
  explicit AdamState(Eigen::Index size)
      : first_moment(Vec::Zero(size)), second_moment(Vec::Zero(size)) {}
};

/// One bias-corrected ADAM update. Throws NumericError on non-finite
/// gradients, leaving parameters and state untouched.
template <typename Scalar>
void adam_step(Eigen::Ref<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> params,
               const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& grads,
               AdamState<Scalar>& state, const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size()) {
    throw ConfigError("adam_step: size mismatch");
  }
  if (!grads.allFinite()) throw NumericError("adam_step: non-finite gradient");
  ++state.step;
  const Scalar lr = static_cast<Scalar>(cfg.schedule.at(state.step));
  const Scalar b1 = static_cast<Scalar>(cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(cfg.beta2);
  state.first_moment = b1 * state.first_moment + (1 - b1) * grads;
  state.second_moment = b2 * state.second_moment + (1 - b2) * grads.cwiseProduct(grads);
  const Scalar c1 = 1 - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar c2 = 1 - std::pow(b2, static_cast<Scalar>(state.step));
  const Scalar eps = static_cast<Scalar>(cfg.epsilon);
  params.array() -= lr * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + eps);
}

using Mlpd = Mlp<double>;

}  // namespace ncp
