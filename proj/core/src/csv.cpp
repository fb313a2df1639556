#include "mrg/csv.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

namespace mrg {

std::string csv_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

void write_link_trace(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "step,link,n_up,n_down,queue_length,transfers\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.link.value << ',' << r.n_up << ',' << r.n_down << ',' << r.queue << ',' << r.transfers << '\n';
  }
}

void write_travel_times(std::ostream& out, const Loader& loader, const std::vector<VehicleId>& agents, int horizon) {
  out << "agent,departure,arrival,travel_time\n";
  for (VehicleId a : agents) {
    const auto& v = loader.vehicle(a);
    const bool arrived = v.status == VehicleStatus::Arrived;
    const int end = arrived ? v.arrival_step : horizon;
    out << a << ',' << v.departure << ',' << (arrived ? std::to_string(v.arrival_step) : std::string("")) << ','
        << (end - v.departure) << '\n';
  }
}

void write_training_trace(std::ostream& out, const std::vector<EpisodeTrace>& trace, int groups) {
  out << "episode,average_travel_time,epsilon,learning_rate";
  for (int g = 0; g < groups; ++g) out << ",loss_g" << g;
  out << '\n';
  for (const auto& row : trace) {
    out << row.episode << ',' << csv_number(row.average_travel_time) << ',' << csv_number(row.epsilon) << ','
        << csv_number(row.learning_rate);
    for (double l : row.loss) out << ',' << csv_number(l);
    out << '\n';
  }
}

void write_baseline_trace(std::ostream& out, const BaselineResult& result) {
  out << "iteration,class,route,flow,proportion,cost,average_travel_time,gap\n";
  for (const auto& it : result.trace) {
    for (std::size_t c = 0; c < it.costs.size(); ++c) {
      for (std::size_t k = 0; k < it.costs[c].size(); ++k) {
        out << it.iteration << ',' << c << ',' << k << ',' << it.flows[c][k] << ',' << csv_number(it.proportions[c][k])
            << ',' << csv_number(it.costs[c][k]) << ',' << csv_number(it.average_travel_time) << ','
            << csv_number(it.gap) << '\n';
      }
    }
  }
}

void write_proportions(std::ostream& out, const BaselineResult& result) {
  out << "class,departure,origin,destination,route,links,flow,proportion,cost\n";
  for (std::size_t c = 0; c < result.classes.size(); ++c) {
    const auto& cls = result.classes[c];
    for (std::size_t k = 0; k < cls.routes.size(); ++k) {
      std::string links;
      for (std::size_t i = 0; i < cls.routes[k].size(); ++i) {
        if (i) links += ' ';
        links += std::to_string(cls.routes[k][i].value);
      }
      out << c << ',' << cls.departure << ',' << cls.origin.value << ',' << cls.destination.value << ',' << k << ','
          << links << ',' << result.final_costs.flows[c][k] << ',' << csv_number(result.proportions[c][k]) << ','
          << csv_number(result.final_costs.costs[c][k]) << '\n';
    }
  }
}

std::vector<std::vector<double>> read_proportions(const std::string& text, const std::vector<DemandClass>& classes) {
  std::vector<std::vector<double>> p;
  for (const auto& c : classes) p.emplace_back(c.routes.size(), 0.0);
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() < 8) throw ConfigError(fmt::format("proportions line {} has too few columns", number));
    try {
      const auto c = static_cast<std::size_t>(std::stoul(cells[0]));
      const auto k = static_cast<std::size_t>(std::stoul(cells[4]));
      if (c >= p.size() || k >= p[c].size()) throw ConfigError("");
      p[c][k] = std::stod(cells[7]);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("proportions line {} does not match the experiment's routes", number));
    }
  }
  for (auto& row : p) {
    double sum = 0.0;
    for (double x : row) sum += x;
    if (sum <= 0.0) throw ConfigError("proportions file leaves a demand class without flow");
    for (double& x : row) x /= sum;
  }
  return p;
}

}  // namespace mrg
