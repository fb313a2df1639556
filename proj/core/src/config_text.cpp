// Line-oriented experiment configuration.
//
//   [network]
//   node id=1 name=origin
//   link id=2 tail=1 head=2 L=0.4 v=0.2 w=0.1 qmax=20 kj=300
//   link id=3 tail=2 head=3 L=0.4 v=0.2 qmax=2@0,1@6      # time-varying capacity
//   link id=4 tail=3 head=4 L=0.4 v=0.2 w=0.1 qmax=2 qexit=2@0,1@6 kj=30  # exit bottleneck
//   link id=0 tail=0 head=1 dummy=origin qmax=4
//   link id=9 tail=4 head=5 dummy=sink
//   link id=7 tail=1 head=3 t0=0 k=40                    # linear-delay link
//   priority node=3 links=5,2
//   [demand]
//   demand time=0 origin=1 destination=4 count=50 group=0
//   background time=0 origin=1 destination=4 count=5 route=2,3,6
//   [experiment]
//   dt=1
//   horizon=60
//   model=ltm
//   discipline=fifo                                       # or movement
//   seed=7
//   episodes=300                                          # solver options are kept verbatim

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "mrg/network.hpp"

namespace mrg {
namespace {

struct Line {
  int number;
  std::string keyword;
  std::map<std::string, std::string> fields;
};

[[noreturn]] void fail(int line, const std::string& message) {
  throw ConfigError(fmt::format("line {}: {}", line, message));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(int line, const std::string& key, std::string_view text) {
  if (text == "inf" || text == "infinity") return kUnbounded;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) fail(line, fmt::format("'{}' is not a number for {}", text, key));
  return value;
}

long long parse_int(int line, const std::string& key, std::string_view text) {
  long long value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) fail(line, fmt::format("'{}' is not an integer for {}", text, key));
  return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      break;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::vector<LinkId> parse_link_list(int line, const std::string& key, std::string_view text) {
  std::vector<LinkId> links;
  for (auto part : split(text, ',')) links.push_back(LinkId{static_cast<int>(parse_int(line, key, trim(part)))});
  return links;
}

CapacitySchedule parse_schedule(int line, std::string_view text) {
  CapacitySchedule schedule;
  for (auto piece : split(text, ',')) {
    piece = trim(piece);
    const auto at = piece.find('@');
    const double value = parse_double(line, "qmax", piece.substr(0, at));
    const int from = at == std::string_view::npos ? 0 : static_cast<int>(parse_int(line, "qmax", piece.substr(at + 1)));
    try {
      schedule.add_piece(from, value);
    } catch (const ConfigError& e) {
      fail(line, e.what());
    }
  }
  return schedule;
}

class FieldReader {
 public:
  explicit FieldReader(const Line& line) : line_(line) {}

  const std::string& required(const std::string& key) {
    auto it = line_.fields.find(key);
    if (it == line_.fields.end()) fail(line_.number, fmt::format("{} is missing field '{}'", line_.keyword, key));
    used_.insert(key);
    return it->second;
  }
  const std::string* optional(const std::string& key) {
    auto it = line_.fields.find(key);
    if (it == line_.fields.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }
  int integer(const std::string& key) { return static_cast<int>(parse_int(line_.number, key, required(key))); }
  void finish() const {
    for (const auto& [key, _] : line_.fields) {
      if (!used_.contains(key)) fail(line_.number, fmt::format("unknown field '{}' on {}", key, line_.keyword));
    }
  }
  [[nodiscard]] int number() const { return line_.number; }

 private:
  const Line& line_;
  std::set<std::string> used_;
};

Line tokenize(int number, std::string_view body) {
  Line line{number, {}, {}};
  std::istringstream in{std::string(body)};
  std::string token;
  in >> line.keyword;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) fail(number, fmt::format("expected key=value, got '{}'", token));
    if (!line.fields.emplace(token.substr(0, eq), token.substr(eq + 1)).second) {
      fail(number, fmt::format("duplicate field '{}'", token.substr(0, eq)));
    }
  }
  return line;
}

Link parse_link(const Line& line) {
  FieldReader r(line);
  Link l;
  l.id = LinkId{r.integer("id")};
  l.tail = NodeId{r.integer("tail")};
  l.head = NodeId{r.integer("head")};
  if (const auto* d = r.optional("dummy")) {
    if (*d == "origin") {
      l.dummy = DummyKind::Origin;
    } else if (*d == "sink") {
      l.dummy = DummyKind::Sink;
    } else {
      fail(line.number, fmt::format("dummy must be 'origin' or 'sink', got '{}'", *d));
    }
  }
  if (const auto* v = r.optional("L")) l.length = parse_double(line.number, "L", *v);
  if (const auto* v = r.optional("v")) l.free_flow_speed = parse_double(line.number, "v", *v);
  if (const auto* v = r.optional("w")) l.backward_speed = parse_double(line.number, "w", *v);
  if (const auto* v = r.optional("kj")) l.jam_density = parse_double(line.number, "kj", *v);
  if (const auto* v = r.optional("qmax")) l.flow_capacity = parse_schedule(line.number, *v);
  if (const auto* v = r.optional("qexit")) l.exit_capacity = parse_schedule(line.number, *v);
  if (const auto* v = r.optional("t0")) l.delay_base = parse_double(line.number, "t0", *v);
  if (const auto* v = r.optional("k")) l.delay_slope = parse_double(line.number, "k", *v);
  r.finish();
  if (!l.is_dummy() && !l.delay_base && l.flow_capacity.empty()) {
    fail(line.number, fmt::format("link {} needs a flow capacity qmax", l.id.value));
  }
  for (double x : {l.length, l.free_flow_speed, l.delay_slope}) {
    if (x < 0.0) fail(line.number, fmt::format("link {} has a negative parameter", l.id.value));
  }
  return l;
}

DemandEntry parse_demand(const Line& line, bool background) {
  FieldReader r(line);
  DemandEntry e;
  e.departure = r.integer("time");
  e.origin = NodeId{r.integer("origin")};
  e.destination = NodeId{r.integer("destination")};
  e.count = r.integer("count");
  if (const auto* g = r.optional("group")) e.group = static_cast<int>(parse_int(line.number, "group", *g));
  if (background) e.route = parse_link_list(line.number, "route", r.required("route"));
  r.finish();
  if (e.count <= 0) fail(line.number, "demand count must be a positive integer");
  return e;
}

std::string format_double(double x) {
  if (std::isinf(x)) return "inf";
  return fmt::format("{}", x);
}

std::string format_schedule(const CapacitySchedule& schedule) {
  std::string out;
  for (const auto& [from, value] : schedule.pieces()) {
    if (!out.empty()) out += ',';
    out += format_double(value) + "@" + std::to_string(from);
  }
  return out;
}

std::string join_links(const std::vector<LinkId>& links) {
  std::string out;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(links[i].value);
  }
  return out;
}

}  // namespace

Experiment load_experiment(std::string_view text) {
  std::vector<Node> nodes;
  std::vector<Link> links;
  std::map<NodeId, std::vector<LinkId>> priorities;
  DemandProfile demand;
  ExperimentSettings settings;
  bool saw_network = false;
  bool saw_content = false;

  enum class Section { None, Network, Demand, Experiment } section = Section::None;
  int number = 0;
  for (auto raw : split(text, '\n')) {
    ++number;
    auto body = raw;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    saw_content = true;

    if (body.front() == '[') {
      if (body == "[network]") {
        section = Section::Network;
        saw_network = true;
      } else if (body == "[demand]") {
        section = Section::Demand;
      } else if (body == "[experiment]") {
        section = Section::Experiment;
      } else {
        fail(number, fmt::format("unknown section {}", body));
      }
      continue;
    }

    switch (section) {
      case Section::None:
        fail(number, "content before the first section header");
      case Section::Network: {
        const Line line = tokenize(number, body);
        if (line.keyword == "node") {
          FieldReader r(line);
          Node n{NodeId{r.integer("id")}, {}};
          if (const auto* name = r.optional("name")) n.name = *name;
          r.finish();
          nodes.push_back(std::move(n));
        } else if (line.keyword == "link") {
          links.push_back(parse_link(line));
        } else if (line.keyword == "priority") {
          FieldReader r(line);
          const NodeId node{r.integer("node")};
          auto order = parse_link_list(number, "links", r.required("links"));
          r.finish();
          if (!priorities.emplace(node, std::move(order)).second) {
            fail(number, fmt::format("duplicate priority order for node {}", node.value));
          }
        } else {
          fail(number, fmt::format("unknown network entry '{}'", line.keyword));
        }
        break;
      }
      case Section::Demand: {
        const Line line = tokenize(number, body);
        if (line.keyword == "demand") {
          demand.entries.push_back(parse_demand(line, false));
        } else if (line.keyword == "background") {
          demand.entries.push_back(parse_demand(line, true));
        } else {
          fail(number, fmt::format("unknown demand entry '{}'", line.keyword));
        }
        break;
      }
      case Section::Experiment: {
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) fail(number, "expected key=value");
        const std::string key{trim(body.substr(0, eq))};
        const std::string value{trim(body.substr(eq + 1))};
        if (key.empty() || value.empty()) fail(number, "expected key=value");
        if (key == "dt") {
          settings.dt = static_cast<int>(parse_int(number, key, value));
        } else if (key == "horizon") {
          settings.horizon = static_cast<int>(parse_int(number, key, value));
        } else if (key == "model") {
          auto model = parse_model(value);
          if (!model) fail(number, fmt::format("unknown loading model '{}'", value));
          settings.model = *model;
        } else if (key == "discipline") {
          auto discipline = parse_discipline(value);
          if (!discipline) fail(number, fmt::format("unknown node discipline '{}'", value));
          settings.discipline = *discipline;
        } else if (key == "seed") {
          settings.seed = static_cast<std::uint64_t>(parse_int(number, key, value));
        } else {
          settings.options[key] = value;
        }
        break;
      }
    }
  }

  if (!saw_content) throw ConfigError("empty configuration");
  if (!saw_network) throw ConfigError("configuration has no [network] section");
  if (settings.dt != 1) throw ConfigError("only dt=1 is supported");
  if (settings.horizon <= 0) throw ConfigError("horizon must be positive");

  Experiment e;
  e.network = Network::build(std::move(nodes), std::move(links), std::move(priorities));
  validate_demand(e.network, demand, settings.horizon);
  e.demand = std::move(demand);
  e.settings = std::move(settings);
  return e;
}

Experiment load_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open configuration '{}'", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_experiment(buffer.str());
}

std::string to_config_text(const Experiment& experiment) {
  std::string out = "[network]\n";
  for (const Node& n : experiment.network.nodes()) {
    out += fmt::format("node id={}", n.id.value);
    if (!n.name.empty()) out += fmt::format(" name={}", n.name);
    out += '\n';
  }
  for (const Link& l : experiment.network.links()) {
    out += fmt::format("link id={} tail={} head={}", l.id.value, l.tail.value, l.head.value);
    if (l.dummy == DummyKind::Origin) out += " dummy=origin";
    if (l.dummy == DummyKind::Sink) out += " dummy=sink";
    if (l.length != 0.0) out += " L=" + format_double(l.length);
    if (l.free_flow_speed != 0.0) out += " v=" + format_double(l.free_flow_speed);
    if (l.backward_speed) out += " w=" + format_double(*l.backward_speed);
    if (l.jam_density) out += " kj=" + format_double(*l.jam_density);
    if (!l.flow_capacity.empty()) out += " qmax=" + format_schedule(l.flow_capacity);
    if (!l.exit_capacity.empty()) out += " qexit=" + format_schedule(l.exit_capacity);
    if (l.delay_base) out += " t0=" + format_double(*l.delay_base);
    if (l.delay_slope != 0.0) out += " k=" + format_double(l.delay_slope);
    out += '\n';
  }
  for (const auto& [node, order] : experiment.network.explicit_priorities()) {
    out += fmt::format("priority node={} links={}\n", node.value, join_links(order));
  }
  out += "[demand]\n";
  for (const auto& e : experiment.demand.entries) {
    out += fmt::format("{} time={} origin={} destination={} count={} group={}", e.is_background() ? "background" : "demand",
                       e.departure, e.origin.value, e.destination.value, e.count, e.group);
    if (e.is_background()) out += " route=" + join_links(e.route);
    out += '\n';
  }
  const auto& s = experiment.settings;
  out += "[experiment]\n";
  out += fmt::format("dt={}\nhorizon={}\nmodel={}\ndiscipline={}\nseed={}\n", s.dt, s.horizon, model_name(s.model),
                     discipline_name(s.discipline), s.seed);
  for (const auto& [key, value] : s.options) out += fmt::format("{}={}\n", key, value);
  return out;
}

}  // namespace mrg
