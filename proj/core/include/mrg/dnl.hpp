#pragma once

/// @file dnl.hpp
/// @brief Dynamic network loading of atomic vehicles.
///
/// Time is discrete with unit steps. Cumulative counts are indexed so that a
/// vehicle crossing a link boundary during step t is counted at index t + 1.
/// A vehicle entering a link during step t may leave it during step
/// t + L/v at the earliest; from that step on it waits at the link head and
/// needs a next-link choice.

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mrg/network.hpp"

namespace mrg {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using VehicleId = int;

/// Large stand-in for an unbounded integer flow.
inline constexpr long long kUnboundedFlow = 1LL << 40;

struct QueuedVehicle {
  VehicleId vehicle{-1};
  int entry_step{0};
  int ready_step{0};
  std::uint64_t sequence{0};  // global entry order, breaks ties on non-FIFO links
};

/// Dynamic record of one link.
struct LinkState {
  LinkId link;
  /// n_up[k] is the number of vehicles that entered before step k.
  std::vector<long long> n_up;
  /// n_down[k] is the number of vehicles that left before step k.
  std::vector<long long> n_down;
  /// Vehicles on the link in entry order (all models except CTM).
  std::deque<QueuedVehicle> queue;
  /// CTM only: cells from upstream to downstream, each in FIFO order.
  std::vector<std::deque<QueuedVehicle>> cells;

  /// Cumulative counts at index k; negative indices read as zero and indices
  /// past the recorded history read the latest value.
  [[nodiscard]] long long up(int k) const noexcept;
  [[nodiscard]] long long down(int k) const noexcept;
  [[nodiscard]] long long occupancy() const noexcept { return n_up.back() - n_down.back(); }
};

/// Integer vehicles per step for a capacity value; unbounded stays unbounded.
[[nodiscard]] long long capacity_per_step(double value) noexcept;
/// Integer storage floor(k_j * L) with a small tolerance for representation error.
[[nodiscard]] long long storage_capacity(const Link& link);

/// Free-flow traversal in whole steps (L/v), at least one.
[[nodiscard]] int free_flow_steps(const Link& link);
/// Backward-wave traversal in whole steps (L/w).
[[nodiscard]] int backward_steps(const Link& link);

/// Vehicles able to leave during step t: min(N_up(t - L/v + 1) - N_down(t), q).
/// Shared by the point-queue, spatial-queue and link-transmission models.
[[nodiscard]] long long sending_flow_ltm(const LinkState& state, const Link& link, int t);
/// min(N_down(t - L/w + 1) + k_j L - N_up(t), q).
[[nodiscard]] long long receiving_flow_ltm(const LinkState& state, const Link& link, int t);
/// Point queue admits up to capacity regardless of occupancy.
[[nodiscard]] long long receiving_flow_pq(const Link& link, int t);
/// min(N_down(t) + k_j L - N_up(t), q).
[[nodiscard]] long long receiving_flow_sq(const LinkState& state, const Link& link, int t);

/// Cell geometry of a CTM link.
struct CellGeometry {
  int cells{1};
  double cell_capacity{0.0};  // k_j * v
  double wave_ratio{1.0};     // w / v
};
[[nodiscard]] CellGeometry cell_geometry(const Link& link);
[[nodiscard]] long long ctm_cell_sending(long long occupancy, long long capacity);
[[nodiscard]] long long ctm_cell_receiving(long long occupancy, const CellGeometry& geometry, long long capacity);

/// Queue waiting at the link head at the end of step t: vehicles able to leave
/// by step t that have not left, N_up(t + 1 - L/v) - N_down(t + 1).
[[nodiscard]] long long queue_length(const LinkState& state, const Link& link, int t);

struct TransitFlow {
  LinkId from_link;
  LinkId to_link;
  int step{0};
  std::vector<VehicleId> vehicles;
};

struct ArrivalEvent {
  VehicleId vehicle{-1};
  NodeId destination;
  int step{0};
};

enum class VehicleStatus { Waiting, EnRoute, Arrived };

/// Static and dynamic description of a vehicle.
struct VehicleRecord {
  VehicleId id{-1};
  NodeId origin;
  NodeId destination;
  int departure{0};
  int group{0};
  std::vector<LinkId> route;  // background vehicles only
  std::size_t route_position{0};

  VehicleStatus status{VehicleStatus::Waiting};
  LinkId link;  // current link (the dummy origin until first transfer)
  int entry_step{0};
  int ready_step{0};
  std::optional<LinkId> choice;
  int arrival_step{-1};

  [[nodiscard]] bool is_background() const noexcept { return !route.empty(); }
};

struct TraceRow {
  int step{0};
  LinkId link;
  long long n_up{0};
  long long n_down{0};
  long long queue{0};
  long long transfers{0};
};

struct StepResult {
  std::vector<TransitFlow> flows;
  std::vector<ArrivalEvent> arrivals;
  /// (vehicle, link) for every vehicle that entered a physical link this step.
  std::vector<std::pair<VehicleId, LinkId>> entries;
};

/// Propagates vehicles one step at a time. Vehicles are created from the
/// demand profile in entry order and wait on their origin's dummy link until
/// departure. Vehicles at their destination are sent to the sink automatically;
/// background vehicles follow their fixed route. All other vehicles need a
/// choice (set_choice) before they can leave a link head.
class Loader {
 public:
  Loader(const Network& network, const DemandProfile& demand, LoadingModel model,
         NodeDiscipline discipline = NodeDiscipline::Fifo);

  [[nodiscard]] const Network& network() const noexcept { return *network_; }
  [[nodiscard]] LoadingModel model() const noexcept { return model_; }
  [[nodiscard]] NodeDiscipline discipline() const noexcept { return discipline_; }
  [[nodiscard]] int clock() const noexcept { return clock_; }

  [[nodiscard]] const std::vector<VehicleRecord>& vehicles() const noexcept { return vehicles_; }
  [[nodiscard]] const VehicleRecord& vehicle(VehicleId id) const { return vehicles_.at(static_cast<std::size_t>(id)); }
  [[nodiscard]] const LinkState& state(LinkId link) const { return states_[network_->link_index(link)]; }
  [[nodiscard]] const std::vector<LinkState>& states() const noexcept { return states_; }

  /// Node the vehicle is heading to on its current link.
  [[nodiscard]] NodeId current_node(VehicleId id) const;
  /// True when the vehicle sits at a link head (or departed from its dummy
  /// origin) at the current clock and has not arrived.
  [[nodiscard]] bool at_head(VehicleId id) const;

  void set_choice(VehicleId id, LinkId next);
  void clear_choice(VehicleId id);
  /// Vehicles holding a standing choice of `link` that have not entered it yet.
  [[nodiscard]] long long committed(LinkId link) const;

  [[nodiscard]] long long arrived() const noexcept { return arrived_; }
  [[nodiscard]] bool finished() const noexcept { return arrived_ == static_cast<long long>(vehicles_.size()); }

  /// Advances by one step (clock -> clock + 1).
  StepResult step();

  void enable_trace(bool on) { trace_enabled_ = on; }
  [[nodiscard]] const std::vector<TraceRow>& trace() const noexcept { return trace_; }

 private:
  [[nodiscard]] long long receiving(std::size_t link_index, int t) const;
  [[nodiscard]] long long sending(std::size_t link_index, int t) const;
  [[nodiscard]] std::vector<QueuedVehicle> eligible(std::size_t link_index, int t) const;
  [[nodiscard]] LinkId resolve_next(const VehicleRecord& v) const;
  void remove_from(std::size_t link_index, VehicleId vehicle);
  void admit(std::size_t link_index, VehicleId vehicle, int t);

  const Network* network_;
  LoadingModel model_;
  NodeDiscipline discipline_;
  int clock_{0};
  std::vector<LinkState> states_;
  std::vector<CellGeometry> geometry_;
  std::vector<VehicleRecord> vehicles_;
  std::vector<long long> committed_;  // by link index
  long long arrived_{0};
  std::uint64_t sequence_{0};
  bool trace_enabled_{false};
  std::vector<TraceRow> trace_;
};

}  // namespace mrg
