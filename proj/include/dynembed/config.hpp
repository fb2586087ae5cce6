#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dynembed/models.hpp"
#include "dynembed/sbm.hpp"

namespace dynembed::harness {

enum class Method { kAE, kRNN, kAERNN, kOptimalSvd, kIncSvd, kRerunSvd };

const char* to_string(Method m);
Method method_from_string(const std::string& name);
bool is_learned(Method m);
models::ModelKind model_kind(Method m);

struct DatasetConfig {
  enum class Type { kSbm, kFile, kPeriodic };
  Type type = Type::kSbm;
  sbm::SbmConfig sbm = sbm::diminish_config(0);
  std::string path;  // snapshot file for kFile
  // Periodic sequence X, X, Y, Y, X, X, ... of two random graphs.
  int periodic_nodes = 64;
  int periodic_steps = 24;
  double periodic_density = 0.1;
  std::uint64_t periodic_seed = 0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  int sample_nodes = 0;  // 0 keeps every node
  std::uint64_t sample_seed = 0;
  Method method = Method::kAERNN;
  int embed_dim = 128;
  int lookback = 3;
  // Empty lists select the default widths for the method.
  std::vector<int> encoder_widths;
  std::vector<int> lstm_widths;
  std::vector<int> decoder_widths;
  double beta = 5.0;
  int epochs = 250;
  int batch_size = 100;
  double lr = 1e-3;
  double theta = 0.1;
  int boundary = 0;  // first evaluated step; 0 selects T/2
  std::uint64_t seed = 0;
  bool retrain_per_step = false;
  bool new_links_only = false;
  std::vector<int> lookbacks{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  models::ModelSpec model_spec(int n) const;
  models::TrainConfig train_config() const;
};

// Unknown keys and ill-typed values raise ArgumentError naming the field.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// Sets a dotted key ("train.epochs") in a JSON object, creating parents.
void set_json_path(nlohmann::json& j, const std::string& dotted, nlohmann::json value);

}  // namespace dynembed::harness
