#pragma once

/// @file network.hpp
/// @brief Road-network data model, demand profile and experiment settings.
///
/// A network is a directed graph of nodes and links. Physical links carry
/// kinematic wave parameters (length, free-flow speed, backward speed, flow
/// capacity, jam density) or, for the linear-delay model, a delay function.
/// Demand enters through dummy origin links and leaves through dummy sink
/// links attached to destination nodes.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mrg {

struct NodeId {
  int value{-1};
  constexpr auto operator<=>(const NodeId&) const = default;
  [[nodiscard]] constexpr bool valid() const noexcept { return value >= 0; }
};

struct LinkId {
  int value{-1};
  constexpr auto operator<=>(const LinkId&) const = default;
  [[nodiscard]] constexpr bool valid() const noexcept { return value >= 0; }
};

/// Raised for malformed configuration text or an inconsistent network.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Piecewise-constant flow capacity (vehicles per step), keyed by the first
/// step at which each value applies. An empty schedule is unbounded.
class CapacitySchedule {
 public:
  CapacitySchedule() = default;
  explicit CapacitySchedule(double constant) { pieces_.emplace_back(0, constant); }

  /// Adds a piece effective from `from_step` onwards. Pieces must be added in
  /// increasing step order.
  void add_piece(int from_step, double value);

  [[nodiscard]] double at(int step) const noexcept;
  [[nodiscard]] bool empty() const noexcept { return pieces_.empty(); }
  [[nodiscard]] const std::vector<std::pair<int, double>>& pieces() const noexcept { return pieces_; }

  bool operator==(const CapacitySchedule&) const = default;

 private:
  std::vector<std::pair<int, double>> pieces_;
};

enum class DummyKind { None, Origin, Sink };

struct Node {
  NodeId id;
  std::string name;
  bool operator==(const Node&) const = default;
};

struct Link {
  LinkId id;
  NodeId tail;
  NodeId head;
  double length{0.0};                     // L
  double free_flow_speed{0.0};            // v
  std::optional<double> backward_speed;   // w
  CapacitySchedule flow_capacity;         // q_max, vehicles per step
  /// Bottleneck at the downstream end; caps sending only. Empty means q_max.
  CapacitySchedule exit_capacity;
  std::optional<double> jam_density;      // k_j, vehicles per distance
  std::optional<double> delay_base;       // linear-delay model: steps at zero flow
  double delay_slope{0.0};                // linear-delay model: steps per vehicle on link
  DummyKind dummy{DummyKind::None};

  [[nodiscard]] bool is_dummy() const noexcept { return dummy != DummyKind::None; }
  bool operator==(const Link&) const = default;
};

/// Immutable directed graph. Links and nodes are kept sorted by id; dense
/// indices into `nodes()` / `links()` are stable for the lifetime of the object.
class Network {
 public:
  Network() = default;

  /// Builds and validates a network. `priorities` may omit nodes, in which
  /// case inbound links are served in ascending LinkId order.
  static Network build(std::vector<Node> nodes, std::vector<Link> links,
                       std::map<NodeId, std::vector<LinkId>> priorities = {});

  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<Link>& links() const noexcept { return links_; }

  [[nodiscard]] bool has_node(NodeId id) const noexcept { return node_index_.contains(id.value); }
  [[nodiscard]] bool has_link(LinkId id) const noexcept { return link_index_.contains(id.value); }
  [[nodiscard]] std::size_t node_index(NodeId id) const;
  [[nodiscard]] std::size_t link_index(LinkId id) const;
  [[nodiscard]] const Link& link(LinkId id) const { return links_[link_index(id)]; }
  [[nodiscard]] const Node& node(NodeId id) const { return nodes_[node_index(id)]; }

  /// Physical outbound links of `node` in ascending LinkId order. Dummy sink
  /// links are never actions and are reported by `sink_link` instead.
  [[nodiscard]] const std::vector<LinkId>& outbound_links(NodeId node) const;
  /// Every inbound link of `node` (dummy origins included) in service order.
  [[nodiscard]] const std::vector<LinkId>& inbound_priority(NodeId node) const;
  /// The dummy origin link whose head is `node`, if any.
  [[nodiscard]] std::optional<LinkId> origin_link(NodeId node) const;
  /// The dummy sink link whose tail is `node`, if any.
  [[nodiscard]] std::optional<LinkId> sink_link(NodeId node) const;
  /// Whether `node` is only a dummy endpoint (tail of an origin or head of a sink).
  [[nodiscard]] bool is_dummy_node(NodeId node) const;

  [[nodiscard]] std::size_t max_out_degree() const noexcept { return max_out_degree_; }
  /// Nodes reachable from `from` through physical links.
  [[nodiscard]] bool reachable(NodeId from, NodeId to) const;

  /// True when every inbound list in the network was given explicitly.
  [[nodiscard]] const std::map<NodeId, std::vector<LinkId>>& explicit_priorities() const noexcept {
    return explicit_priorities_;
  }

  bool operator==(const Network& other) const {
    return nodes_ == other.nodes_ && links_ == other.links_ && inbound_ == other.inbound_;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::unordered_map<int, std::size_t> node_index_;
  std::unordered_map<int, std::size_t> link_index_;
  std::vector<std::vector<LinkId>> outbound_;  // by node index
  std::vector<std::vector<LinkId>> inbound_;   // by node index, service order
  std::vector<std::optional<LinkId>> origin_;  // by node index
  std::vector<std::optional<LinkId>> sink_;    // by node index
  std::map<NodeId, std::vector<LinkId>> explicit_priorities_;
  std::size_t max_out_degree_{0};
};

struct DemandEntry {
  int departure{0};
  NodeId origin;
  NodeId destination;
  int count{0};
  int group{0};
  /// Non-empty for scripted background traffic: the fixed physical route.
  std::vector<LinkId> route;

  [[nodiscard]] bool is_background() const noexcept { return !route.empty(); }
  bool operator==(const DemandEntry&) const = default;
};

struct DemandProfile {
  std::vector<DemandEntry> entries;

  [[nodiscard]] int total() const noexcept;
  [[nodiscard]] int controllable() const noexcept;
  bool operator==(const DemandProfile&) const = default;
};

enum class LoadingModel { PointQueue, SpatialQueue, CellTransmission, LinkTransmission, LinearDelay };

[[nodiscard]] std::optional<LoadingModel> parse_model(std::string_view name);
[[nodiscard]] std::string_view model_name(LoadingModel model);

/// What happens to vehicles queued behind one whose target link is full.
/// `Fifo` holds them all (no overtaking on the inbound link); `Movement`
/// lets vehicles bound for other outbound links pass, keeping FIFO order per
/// turning movement.
enum class NodeDiscipline { Fifo, Movement };

[[nodiscard]] std::optional<NodeDiscipline> parse_discipline(std::string_view name);
[[nodiscard]] std::string_view discipline_name(NodeDiscipline discipline);

struct ExperimentSettings {
  int dt{1};
  int horizon{100};
  LoadingModel model{LoadingModel::LinkTransmission};
  NodeDiscipline discipline{NodeDiscipline::Fifo};
  std::uint64_t seed{1};
  /// Solver hyperparameters and other free-form keys, verbatim.
  std::map<std::string, std::string> options;

  bool operator==(const ExperimentSettings&) const = default;
};

struct Experiment {
  Network network;
  DemandProfile demand;
  ExperimentSettings settings;

  bool operator==(const Experiment&) const = default;
};

/// Parses an experiment from its text form. See `to_config_text` for the schema.
[[nodiscard]] Experiment load_experiment(std::string_view text);
[[nodiscard]] Experiment load_experiment_file(const std::string& path);
/// Serializes an experiment such that `load_experiment(to_config_text(e)) == e`.
[[nodiscard]] std::string to_config_text(const Experiment& experiment);

/// Checks demand against the network: known origins with a dummy origin link,
/// destinations with a sink link, reachability, positive counts, departures in [0, T].
void validate_demand(const Network& network, const DemandProfile& demand, int horizon);

/// Checks that the chosen loading model has the link parameters it needs.
void validate_model_parameters(const Network& network, LoadingModel model);

struct DiscretizationIssue {
  LinkId link;
  std::string quantity;  // "L/v" or "L/w"
  double ratio{0.0};
  bool operator==(const DiscretizationIssue&) const = default;
};

/// Lists physical links whose L/(v dt) or L/(w dt) is not an integer. Empty
/// means the network is compatible with cumulative-count lookups on the step grid.
[[nodiscard]] std::vector<DiscretizationIssue> validate_discretization(const Network& network, int dt);

/// Integer number of steps `ratio` represents, or nullopt when not integral.
[[nodiscard]] std::optional<int> integral_steps(double ratio);

}  // namespace mrg

template <>
struct std::hash<mrg::NodeId> {
  std::size_t operator()(const mrg::NodeId& id) const noexcept { return std::hash<int>{}(id.value); }
};

template <>
struct std::hash<mrg::LinkId> {
  std::size_t operator()(const mrg::LinkId& id) const noexcept { return std::hash<int>{}(id.value); }
};
