#include "mrg/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace mrg {
namespace {

Gradient zeros_like(const Mlp& net) {
  Gradient g;
  for (const auto& w : net.weights()) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : net.biases()) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

}  // namespace

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2 || widths_.back() != 1) throw std::invalid_argument("network needs an input width and a scalar output");
  for (int w : widths_) {
    if (w <= 0) throw std::invalid_argument("layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(widths_[l + 1], widths_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(widths_[l + 1]));
  }
}

Mlp Mlp::random(std::vector<int> widths, std::uint64_t seed) {
  Mlp net(std::move(widths));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.weights_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.widths_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < net.weights_[l].cols(); ++j) {
      for (Eigen::Index i = 0; i < net.weights_[l].rows(); ++i) net.weights_[l](i, j) = u(rng);
    }
    for (Eigen::Index i = 0; i < net.biases_[l].size(); ++i) net.biases_[l](i) = u(rng);
  }
  return net;
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

void Mlp::check_input(const Eigen::VectorXd& x) const {
  if (weights_.empty()) throw std::invalid_argument("network has no layers");
  if (x.size() != widths_.front()) {
    throw std::invalid_argument(fmt::format("input has width {}, network expects {}", x.size(), widths_.front()));
  }
}

double Mlp::forward(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    a = (l + 1 < weights_.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a(0);
}

double Mlp::loss(const std::vector<Sample>& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  double total = 0.0;
  for (const auto& s : batch) {
    const double e = forward(s.input) - s.target;
    total += e * e;
  }
  return total / static_cast<double>(batch.size());
}

Gradient Mlp::gradient(const std::vector<Sample>& batch) const {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Gradient g = zeros_like(*this);
  const std::size_t layers = weights_.size();
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<Eigen::VectorXd> activations(layers + 1);
  std::vector<Eigen::VectorXd> pre(layers);
  for (const auto& s : batch) {
    check_input(s.input);
    activations[0] = s.input;
    for (std::size_t l = 0; l < layers; ++l) {
      pre[l] = weights_[l] * activations[l] + biases_[l];
      activations[l + 1] = (l + 1 < layers) ? Eigen::VectorXd(pre[l].cwiseMax(0.0)) : pre[l];
    }
    Eigen::VectorXd delta(1);
    delta(0) = 2.0 * (activations[layers](0) - s.target) * inv;
    for (std::size_t l = layers; l-- > 0;) {
      g.weights[l].noalias() += delta * activations[l].transpose();
      g.biases[l] += delta;
      if (l == 0) break;
      Eigen::VectorXd back = weights_[l].transpose() * delta;
      delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

void Mlp::apply(const Gradient& step, double scale) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] += scale * step.weights[l];
    biases_[l] += scale * step.biases[l];
  }
}

double Mlp::sgd_step(const std::vector<Sample>& batch, double learning_rate) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  const double before = loss(batch);
  if (!std::isfinite(before)) throw DivergenceError("loss is not finite");
  apply(gradient(batch), -learning_rate);
  return before;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.insert(flat.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
    flat.insert(flat.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
  }
  return flat;
}

std::vector<double> Mlp::flatten(const Gradient& g) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    flat.insert(flat.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
    flat.insert(flat.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
  }
  return flat;
}

void Mlp::assign(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("parameter vector has the wrong size");
  auto it = flat.begin();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::copy_n(it, weights_[l].size(), weights_[l].data());
    it += weights_[l].size();
    std::copy_n(it, biases_[l].size(), biases_[l].data());
    it += biases_[l].size();
  }
}

bool Mlp::operator==(const Mlp& other) const {
  if (widths_ != other.widths_) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  }
  return true;
}

AdamState::AdamState(const Mlp& shape) : m_(zeros_like(shape)), v_(zeros_like(shape)) {}

double AdamState::step(Mlp& net, const std::vector<Sample>& batch, double learning_rate) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  const double before = net.loss(batch);
  if (!std::isfinite(before)) throw DivergenceError("loss is not finite");
  if (m_.weights.empty()) *this = AdamState(net);
  const Gradient g = net.gradient(batch);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    param.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    update(net.weights()[l], m_.weights[l], v_.weights[l], g.weights[l]);
    update(net.biases()[l], m_.biases[l], v_.biases[l], g.biases[l]);
  }
  return before;
}

double gradient_check(const Mlp& net, const Eigen::VectorXd& x, double target, double h, const AnalyticGradient& analytic) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const std::vector<Sample> batch{{x, target}};
  const Gradient g = analytic ? analytic(net, batch) : net.gradient(batch);
  const std::vector<double> a = Mlp::flatten(g);
  std::vector<double> params = net.flatten();
  Mlp probe = net;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    probe.assign(params);
    const double plus = probe.loss(batch);
    params[i] = saved - h;
    probe.assign(params);
    const double minus = probe.loss(batch);
    params[i] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double scale = std::max({std::abs(a[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a[i] - numeric) / scale);
  }
  return worst;
}

QEncoder::QEncoder(const Network& network, int horizon, double mean_action_scale)
    : network_(&network),
      horizon_(std::max(1, horizon)),
      scale_(mean_action_scale > 0.0 ? mean_action_scale : 1.0),
      nodes_(static_cast<int>(network.nodes().size())),
      slots_(static_cast<int>(std::max<std::size_t>(1, network.max_out_degree()))) {
  width_ = nodes_ + 1 + slots_ + 1;
}

Eigen::VectorXd QEncoder::encode(NodeId node, int time, LinkId action, double mean_action) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(width_);
  x(static_cast<Eigen::Index>(network_->node_index(node))) = 1.0;
  x(nodes_) = static_cast<double>(time) / static_cast<double>(horizon_);
  const auto& out = network_->outbound_links(node);
  const auto it = std::find(out.begin(), out.end(), action);
  if (it == out.end()) throw std::invalid_argument(fmt::format("link {} does not leave node {}", action.value, node.value));
  x(nodes_ + 1 + static_cast<Eigen::Index>(it - out.begin())) = 1.0;
  x(nodes_ + 1 + slots_) = mean_action / scale_;
  return x;
}

}  // namespace mrg
