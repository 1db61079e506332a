#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rgdno/tensor.hpp"

namespace rgdno {

// Versioned binary container of named f64 arrays, i64 arrays and string
// lists (little-endian). Backs the checkpoint file and the per-solve tensor
// dumps; round trips are bit-exact.
class Archive {
 public:
  void put_tensor(const std::string& name, const Tensor& t);
  void put_doubles(const std::string& name, std::vector<double> values);
  void put_ints(const std::string& name, std::vector<std::int64_t> values);
  void put_strings(const std::string& name, std::vector<std::string> values);

  bool has(const std::string& name) const;
  Tensor tensor(const std::string& name) const;
  const std::vector<double>& doubles(const std::string& name) const;
  const std::vector<std::int64_t>& ints(const std::string& name) const;
  const std::vector<std::string>& strings(const std::string& name) const;
  std::int64_t int_value(const std::string& name) const;

  void write(const std::string& path) const;
  static Archive read(const std::string& path);

 private:
  struct TensorEntry {
    std::vector<int> shape;  // empty shape = flat doubles
    std::vector<double> data;
  };
  std::map<std::string, TensorEntry> tensors_;
  std::map<std::string, std::vector<std::int64_t>> ints_;
  std::map<std::string, std::vector<std::string>> strings_;
};

}  // namespace rgdno
