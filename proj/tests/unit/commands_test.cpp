#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mrg_tools/commands.hpp"
#include "support.hpp"

namespace mrg::tools {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("mrg_commands_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CommandOptions options_for(const std::string& config, const fs::path& out) {
  CommandOptions o;
  o.config = config;
  o.out = out.string();
  return o;
}

TEST(Simulate, EmptyDemandWritesHeadersOnly) {
  const fs::path dir = scratch("empty");
  Experiment e = test::bundled("simple_due");
  e.demand.entries.clear();
  std::ofstream(dir / "empty.cfg") << to_config_text(e);
  EXPECT_EQ(cmd_simulate(options_for((dir / "empty.cfg").string(), dir / "out")), 0);
  EXPECT_EQ(slurp(dir / "out" / "link_trace.csv"), "step,link,n_up,n_down,queue_length,transfers\n");
  EXPECT_EQ(slurp(dir / "out" / "travel_times.csv"), "agent,departure,arrival,travel_time\n");
}

TEST(Simulate, UnknownModelIsAUsageError) {
  CommandOptions o = options_for(test::config_path("simple_due"), scratch("bad_model"));
  o.model = "dq";
  EXPECT_THROW(cmd_simulate(o), UsageError);
}

TEST(Simulate, PolicyAndProportionsAreExclusive) {
  CommandOptions o = options_for(test::config_path("simple_due"), scratch("exclusive"));
  o.policy = "a";
  o.proportions = "b";
  EXPECT_THROW(cmd_simulate(o), UsageError);
}

TEST(Simulate, SpillbackTraceShowsQueueOnsets) {
  const fs::path dir = scratch("spillback");
  std::ofstream(dir / "half.csv") << "class,departure,origin,destination,route,links,flow,proportion,cost\n"
                                  << "0,0,1,4,0,1 2 3,45,0.5,0\n0,0,1,4,1,1 2 4,45,0.5,0\n";
  CommandOptions o = options_for(test::config_path("simple_spillback"), dir / "out");
  o.proportions = (dir / "half.csv").string();
  ASSERT_EQ(cmd_simulate(o), 0);
  std::istringstream trace(slurp(dir / "out" / "link_trace.csv"));
  std::string line;
  std::getline(trace, line);
  std::map<int, int> onset;
  while (std::getline(trace, line)) {
    int step = 0, link = 0;
    long long up = 0, down = 0, queue = 0;
    char c = 0;
    std::istringstream row(line);
    row >> step >> c >> link >> c >> up >> c >> down >> c >> queue;
    if (queue > 0 && !onset.contains(link)) onset[link] = step;
  }
  EXPECT_EQ(onset.at(2), 12);
  EXPECT_EQ(onset.at(1), 20);
}

TEST(Train, SameSeedGivesIdenticalFiles) {
  const fs::path dir = scratch("determinism");
  CommandOptions o = options_for(test::config_path("braess_two"), dir / "a");
  o.episodes = 30;
  ASSERT_EQ(cmd_train(o), 0);
  o.out = (dir / "b").string();
  ASSERT_EQ(cmd_train(o), 0);
  for (const char* f : {"training.csv", "policy.txt", "travel_times.csv"}) {
    EXPECT_FALSE(slurp(dir / "a" / f).empty()) << f;
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Baseline, WritesProportionsThatSimulateAccepts) {
  const fs::path dir = scratch("baseline");
  CommandOptions o = options_for(test::config_path("simple_due"), dir / "base");
  ASSERT_EQ(cmd_baseline(o), 0);
  const std::string props = slurp(dir / "base" / "proportions.csv");
  EXPECT_EQ(props.rfind("class,departure,origin,destination,route,links,flow,proportion,cost\n", 0), 0u);
  CommandOptions sim = options_for(test::config_path("simple_due"), dir / "sim");
  sim.proportions = (dir / "base" / "proportions.csv").string();
  EXPECT_EQ(cmd_simulate(sim), 0);
}

TEST(Compare, TruncatedTrainingStillReports) {
  const fs::path dir = scratch("compare");
  CommandOptions o = options_for(test::config_path("simple_due"), dir);
  o.episodes = 5;
  EXPECT_EQ(cmd_compare(o), 0);
  const std::string csv = slurp(dir / "compare.csv");
  EXPECT_NE(csv.find("relative_gap,"), std::string::npos);
  EXPECT_NE(csv.find("marl_episodes,5"), std::string::npos);
}

}  // namespace
}  // namespace mrg::tools
