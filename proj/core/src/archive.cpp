#include "rgdno/archive.hpp"

#include <cstring>
#include <fstream>

#include "rgdno/errors.hpp"

namespace rgdno {

namespace {

constexpr char kMagic[8] = {'R', 'G', 'A', 'R', '0', '0', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

enum Kind : std::uint64_t { kTensor = 0, kInts = 1, kStrings = 2 };

}  // namespace

void Archive::put_tensor(const std::string& name, const Tensor& t) {
  tensors_[name] = {t.shape(), t.values()};
}

void Archive::put_doubles(const std::string& name, std::vector<double> values) {
  tensors_[name] = {{}, std::move(values)};
}

void Archive::put_ints(const std::string& name,
                       std::vector<std::int64_t> values) {
  ints_[name] = std::move(values);
}

void Archive::put_strings(const std::string& name,
                          std::vector<std::string> values) {
  strings_[name] = std::move(values);
}

bool Archive::has(const std::string& name) const {
  return tensors_.count(name) || ints_.count(name) || strings_.count(name);
}

Tensor Archive::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw ValidationError("archive: missing tensor '" + name + "'");
  }
  std::vector<int> shape = it->second.shape;
  if (shape.empty()) shape = {static_cast<int>(it->second.data.size())};
  return Tensor::from(shape, it->second.data);
}

const std::vector<double>& Archive::doubles(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw ValidationError("archive: missing doubles '" + name + "'");
  }
  return it->second.data;
}

const std::vector<std::int64_t>& Archive::ints(const std::string& name) const {
  auto it = ints_.find(name);
  if (it == ints_.end()) {
    throw ValidationError("archive: missing ints '" + name + "'");
  }
  return it->second;
}

const std::vector<std::string>& Archive::strings(
    const std::string& name) const {
  auto it = strings_.find(name);
  if (it == strings_.end()) {
    throw ValidationError("archive: missing strings '" + name + "'");
  }
  return it->second;
}

std::int64_t Archive::int_value(const std::string& name) const {
  const auto& v = ints(name);
  if (v.size() != 1) {
    throw ValidationError("archive: '" + name + "' is not a single int");
  }
  return v[0];
}

void Archive::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("archive: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, tensors_.size() + ints_.size() + strings_.size());
  for (const auto& [name, entry] : tensors_) {
    write_string(out, name);
    write_u64(out, kTensor);
    write_u64(out, entry.shape.size());
    for (int d : entry.shape) write_u64(out, static_cast<std::uint64_t>(d));
    write_u64(out, entry.data.size());
    for (double v : entry.data) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof(bits));
      write_u64(out, bits);
    }
  }
  for (const auto& [name, values] : ints_) {
    write_string(out, name);
    write_u64(out, kInts);
    write_u64(out, values.size());
    for (std::int64_t v : values) write_u64(out, static_cast<std::uint64_t>(v));
  }
  for (const auto& [name, values] : strings_) {
    write_string(out, name);
    write_u64(out, kStrings);
    write_u64(out, values.size());
    for (const auto& s : values) write_string(out, s);
  }
  if (!out) throw RuntimeFailure("archive: write failed for " + path);
}

Archive Archive::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("archive: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("archive: " + path + " is not an rgdno archive");
  }
  Archive a;
  const std::uint64_t entries = read_u64(in);
  for (std::uint64_t e = 0; e < entries; ++e) {
    const std::string name = read_string(in);
    const std::uint64_t kind = read_u64(in);
    if (kind == kTensor) {
      const std::uint64_t rank = read_u64(in);
      std::vector<int> shape(rank);
      for (auto& d : shape) d = static_cast<int>(read_u64(in));
      const std::uint64_t n = read_u64(in);
      std::vector<double> data(n);
      for (auto& v : data) {
        const std::uint64_t bits = read_u64(in);
        std::memcpy(&v, &bits, sizeof(v));
      }
      a.tensors_[name] = {std::move(shape), std::move(data)};
    } else if (kind == kInts) {
      const std::uint64_t n = read_u64(in);
      std::vector<std::int64_t> values(n);
      for (auto& v : values) v = static_cast<std::int64_t>(read_u64(in));
      a.ints_[name] = std::move(values);
    } else if (kind == kStrings) {
      const std::uint64_t n = read_u64(in);
      std::vector<std::string> values(n);
      for (auto& s : values) s = read_string(in);
      a.strings_[name] = std::move(values);
    } else {
      throw ValidationError("archive: unknown entry kind in " + path);
    }
    if (!in) throw ValidationError("archive: truncated file " + path);
  }
  return a;
}

}  // namespace rgdno
