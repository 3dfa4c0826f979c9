#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

namespace wpkit {

struct RunConfig {
  std::string subcommand;
  std::string dataset;
  std::string format = "cifar10";
  std::string split = "train";
  std::string test_dataset;
  std::string wavelet = "db3";
  int level = 2;
  int pad = 2;
  std::string mode = "absavg";
  bool compare = false;
  std::string trigger;
  std::string pooling = "pooled";
  std::string regions;
  double k = 6.0;
  std::optional<double> k_prime;  // defaults to k
  double alpha = 1.0;
  double ratio = 0.00004;
  int target = 0;
  std::uint64_t seed = 0;
  bool mask_original = true;
  std::string storage = "raw";
  std::string predictions;
  std::string labels;
  std::string poisoned_predictions;
  std::optional<std::uint64_t> tp, fp, fn, tn;
  double omega = 1.0;
  std::optional<double> bandwidth;  // nullopt = Silverman
  std::string train_features;
  std::string test_features;
  std::string out;
  unsigned jobs = 0;

  // Range checks shared by every subcommand. Throws Error("invalid-config").
  void validate() const;
};

// Applies the keys of a JSON config document (same names as the flags, with
// '_' for '-') on top of `cfg`. Unknown keys throw Error("invalid-config").
void apply_config_json(RunConfig& cfg, const nlohmann::json& doc);

// Full command line entry point. Data goes to files or `out`, progress and
// errors to `err`; errors are one JSON object {"error": id, "message": ...}.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wpkit
