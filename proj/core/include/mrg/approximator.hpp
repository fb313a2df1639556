#pragma once

/// @file approximator.hpp
/// @brief Small fully connected network used as the action-value function.
///
/// Hidden layers use rectified-linear units; the output layer is a single
/// linear unit. Training minimizes the mean squared error over a batch.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mrg/network.hpp"

namespace mrg {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  Eigen::VectorXd input;
  double target{0.0};
};

/// Gradient with the same layout as the network parameters.
struct Gradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network with layer widths {input, hidden..., 1}.
  explicit Mlp(std::vector<int> widths);
  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from a seeded engine.
  static Mlp random(std::vector<int> widths, std::uint64_t seed);

  [[nodiscard]] const std::vector<int>& widths() const noexcept { return widths_; }
  [[nodiscard]] int input_width() const noexcept { return widths_.front(); }
  [[nodiscard]] std::size_t parameter_count() const noexcept;

  [[nodiscard]] double forward(const Eigen::VectorXd& x) const;
  [[nodiscard]] double loss(const std::vector<Sample>& batch) const;
  /// Gradient of the batch mean squared error.
  [[nodiscard]] Gradient gradient(const std::vector<Sample>& batch) const;
  /// One plain gradient step; returns the loss before the step.
  double sgd_step(const std::vector<Sample>& batch, double learning_rate);
  void apply(const Gradient& step, double scale);

  [[nodiscard]] std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);
  [[nodiscard]] static std::vector<double> flatten(const Gradient& g);

  std::vector<Eigen::MatrixXd>& weights() noexcept { return weights_; }
  std::vector<Eigen::VectorXd>& biases() noexcept { return biases_; }
  [[nodiscard]] const std::vector<Eigen::MatrixXd>& weights() const noexcept { return weights_; }
  [[nodiscard]] const std::vector<Eigen::VectorXd>& biases() const noexcept { return biases_; }

  bool operator==(const Mlp& other) const;

 private:
  void check_input(const Eigen::VectorXd& x) const;

  std::vector<int> widths_;
  std::vector<Eigen::MatrixXd> weights_;  // weights_[l] is widths_[l+1] x widths_[l]
  std::vector<Eigen::VectorXd> biases_;
};

/// Adam moment estimates for one network.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const Mlp& shape);
  /// Applies one Adam update; returns the loss before the step.
  double step(Mlp& net, const std::vector<Sample>& batch, double learning_rate);

 private:
  Gradient m_;
  Gradient v_;
  long long t_{0};
};

using AnalyticGradient = std::function<Gradient(const Mlp&, const std::vector<Sample>&)>;

/// Worst relative error |analytic - numeric| / max(|analytic|, |numeric|)
/// over all parameters, using central differences with step h.
[[nodiscard]] double gradient_check(const Mlp& net, const Eigen::VectorXd& x, double target, double h,
                                    const AnalyticGradient& analytic = {});

/// Fixed-width encoding of (node, time, action slot, mean action).
class QEncoder {
 public:
  QEncoder() = default;
  QEncoder(const Network& network, int horizon, double mean_action_scale);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] Eigen::VectorXd encode(NodeId node, int time, LinkId action, double mean_action) const;

 private:
  const Network* network_{nullptr};
  int horizon_{1};
  double scale_{1.0};
  int nodes_{0};
  int slots_{0};
  int width_{0};
};

}  // namespace mrg
