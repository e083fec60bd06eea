#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ilac/model.hpp"
#include "ilac/synthetic.hpp"
#include "ilac/training.hpp"

namespace ilac {

// Everything a command needs, resolved in this order: defaults, --config
// file, command-line flags, then ILAC_SEED.
struct RunConfig {
  std::string command;
  GenSpec gen;
  ModelConfig model = ModelConfig::desk(30, 10, 32);
  TrainConfig train;
  std::vector<std::string> eval_modes = {"predcls", "sgcls"};
  std::vector<std::size_t> eval_ks = {50, 100};
  std::string baseline;  // "" or "freq"
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

// Entry point behind the `ilac` binary. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ilac
