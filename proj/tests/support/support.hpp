#pragma once

#include <string>

#include "mrg/network.hpp"

namespace mrg::test {

inline std::string config_path(const std::string& name) { return std::string(MRG_CONFIG_DIR) + "/" + name + ".cfg"; }

inline Experiment bundled(const std::string& name) { return load_experiment_file(config_path(name)); }

}  // namespace mrg::test
