#pragma once

/// @file csv.hpp
/// @brief CSV artifacts. Outputs carry no wall-clock data so repeated runs
/// with the same seed are byte-identical.

#include <ostream>
#include <string>
#include <vector>

#include "mrg/baseline.hpp"
#include "mrg/dnl.hpp"
#include "mrg/learner.hpp"

namespace mrg {

/// Shortest round-trip text for a double.
[[nodiscard]] std::string csv_number(double x);

/// step,link,n_up,n_down,queue_length,transfers
void write_link_trace(std::ostream& out, const std::vector<TraceRow>& rows);
/// agent,departure,arrival,travel_time
void write_travel_times(std::ostream& out, const Loader& loader, const std::vector<VehicleId>& agents, int horizon);
/// episode,average_travel_time,epsilon,learning_rate,loss_g0,...
void write_training_trace(std::ostream& out, const std::vector<EpisodeTrace>& trace, int groups);
/// iteration,class,route,flow,proportion,cost,average_travel_time,gap
void write_baseline_trace(std::ostream& out, const BaselineResult& result);
/// class,departure,origin,destination,route,links,flow,proportion,cost
void write_proportions(std::ostream& out, const BaselineResult& result);

/// Reads a proportions file written by write_proportions back into per-class vectors.
[[nodiscard]] std::vector<std::vector<double>> read_proportions(const std::string& text,
                                                                const std::vector<DemandClass>& classes);

}  // namespace mrg
