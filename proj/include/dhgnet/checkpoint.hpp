#pragma once

// Parameter checkpoints: a text manifest of (name, rows, cols) followed by
// the raw values as little-endian IEEE-754 doubles, in manifest order.
//
//   dhgnet-checkpoint 1
//   <count>
//   <name> <rows> <cols>     (count lines)
//   <payload>

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>

#include "dhgnet/tape.hpp"

namespace dhgnet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_checkpoint(std::ostream& os, const ParamStore& params) {
  os << "dhgnet-checkpoint 1\n" << params.size() << '\n';
  for (const auto& [name, t] : params) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos) {
      throw CheckpointError("parameter name not serializable: '" + name + "'");
    }
    os << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  }
  for (const auto& [name, t] : params) {
    for (double v : t.values()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      std::array<char, 8> bytes{};
      for (std::size_t b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
      os.write(bytes.data(), 8);
    }
  }
  if (!os) throw CheckpointError("checkpoint write failed");
}

inline ParamStore read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "dhgnet-checkpoint 1") {
    throw CheckpointError("not a dhgnet checkpoint");
  }
  std::size_t count = 0;
  if (!std::getline(is, line)) throw CheckpointError("truncated checkpoint manifest");
  {
    std::istringstream ls(line);
    if (!(ls >> count)) throw CheckpointError("bad parameter count");
  }
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw CheckpointError("truncated checkpoint manifest");
    std::istringstream ls(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(ls >> name >> rows >> cols)) throw CheckpointError("bad manifest line: " + line);
    manifest.emplace_back(name, rows, cols);
  }
  ParamStore out;
  for (const auto& [name, rows, cols] : manifest) {
    Tensor t(rows, cols);
    for (double& v : t.values()) {
      std::array<unsigned char, 8> bytes{};
      if (!is.read(reinterpret_cast<char*>(bytes.data()), 8)) {
        throw CheckpointError("truncated checkpoint payload at " + name);
      }
      std::uint64_t bits = 0;
      for (std::size_t b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      v = std::bit_cast<double>(bits);
    }
    if (!out.emplace(name, std::move(t)).second) throw CheckpointError("duplicate parameter " + name);
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path + " for writing");
  write_checkpoint(os, params);
}

inline ParamStore load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

}  // namespace dhgnet
