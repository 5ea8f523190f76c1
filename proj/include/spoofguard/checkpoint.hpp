#pragma once

// Tensor checkpoint layout:
//
//   SPOOFGUARD-TENSORS v1\n
//   count <n>\n
//   <name> <rank> <d0> ... <d{rank-1}>\n      (n lines)
//   data\n
//   <float64 little-endian buffers, row-major, in manifest order>

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "spoofguard/binary_io.hpp"
#include "spoofguard/error.hpp"
#include "spoofguard/tensor.hpp"

namespace spoofguard {

inline constexpr const char* kTensorCheckpointHeader = "SPOOFGUARD-TENSORS v1";

inline void write_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  os << kTensorCheckpointHeader << '\n' << "count " << tensors.size() << '\n';
  for (const auto& t : tensors) {
    if (t.name.empty() || t.name.find_first_of(" \t\n") != std::string::npos) {
      throw InvalidInput("checkpoint tensor name '" + t.name + "' must be a non-empty token");
    }
    os << t.name << ' ' << t.value.rank();
    for (std::size_t d : t.value.shape()) os << ' ' << d;
    os << '\n';
  }
  os << "data\n";
  for (const auto& t : tensors)
    for (double v : t.value.data()) binio::put_f64(os, v);
  if (!os) throw IoError("failed writing tensor checkpoint");
}

inline std::vector<NamedTensor> read_tensors(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTensorCheckpointHeader) {
    throw ParseError("not a tensor checkpoint (expected header '" + std::string(kTensorCheckpointHeader) + "')");
  }
  std::size_t count = 0;
  {
    if (!std::getline(is, line)) throw ParseError("checkpoint: missing count line");
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> count) || key != "count") throw ParseError("checkpoint: malformed count line");
  }
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw ParseError("checkpoint: manifest truncated");
    std::istringstream ls(line);
    NamedTensor nt;
    std::size_t rank = 0;
    if (!(ls >> nt.name >> rank)) throw ParseError("checkpoint: malformed manifest line '" + line + "'");
    Shape shape(rank);
    for (auto& d : shape)
      if (!(ls >> d)) throw ParseError("checkpoint: malformed shape for '" + nt.name + "'");
    nt.value = Tensor(std::move(shape));
    out.push_back(std::move(nt));
  }
  if (!std::getline(is, line) || line != "data") throw ParseError("checkpoint: missing data marker");
  for (auto& nt : out)
    for (double& v : nt.value.data()) v = binio::get_f64(is, "checkpoint tensor '" + nt.name + "'");
  return out;
}

}  // namespace spoofguard
