#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dynembed/linalg.hpp"

namespace dynembed::nn {

struct AdamConfig;

struct Param {
  Matrix value;
  Matrix grad;
  // Adam first and second moment estimates.
  Matrix m;
  Matrix v;
};

// Named learnable matrices with gradient slots and optimizer state. Names are
// kept in sorted order so iteration (and serialization) is deterministic.
class ParamStore {
 public:
  Param& add(const std::string& name, Matrix init);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  // Total number of scalar weights.
  std::size_t scalar_count() const;

  void zero_grad();
  std::int64_t step() const { return step_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  friend void adam_step(ParamStore&, const AdamConfig&);

  std::map<std::string, Param> params_;
  std::int64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update of every parameter, then zeroes the gradients.
void adam_step(ParamStore& store, const AdamConfig& cfg);

// Binary parameter container, little-endian:
//   "DYNP"  u32 version(=1)  u32 count
//   per parameter (sorted by name):
//     u32 name_length  name bytes  u64 rows  u64 cols  rows*cols f64 (row-major)
void write_params(const ParamStore& store, std::ostream& out);
ParamStore read_params(std::istream& in);

}  // namespace dynembed::nn
