#pragma once

// Model checkpoints: a text header naming the model and its configuration as
// key=value lines, terminated by "end", followed by a tensor checkpoint of
// the trainable parameters and (prefixed "buffer.") the non-trainable state.

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "spoofguard/checkpoint.hpp"
#include "spoofguard/config.hpp"
#include "spoofguard/error.hpp"
#include "spoofguard/raw_res2net.hpp"
#include "spoofguard/tiny_model.hpp"

namespace spoofguard {

inline constexpr const char* kModelCheckpointHeader = "SPOOFGUARD-MODEL v1";
inline constexpr const char* kBufferPrefix = "buffer.";

using AnyModel = std::variant<TinyReference, RawRes2Net>;

template <class M>
void save_model(std::ostream& os, const M& model) {
  os << kModelCheckpointHeader << '\n' << "model=" << M::kName << '\n';
  model.config_kv().write(os);
  os << "end\n";
  std::vector<NamedTensor> all = model.parameters().entries();
  for (auto b : model.buffers()) {
    b.name = kBufferPrefix + b.name;
    all.push_back(std::move(b));
  }
  write_tensors(os, all);
}

inline void save_model(std::ostream& os, const AnyModel& model) {
  std::visit([&](const auto& m) { save_model(os, m); }, model);
}

namespace model_io_detail {

template <class M>
void assign_tensors(M& model, std::vector<NamedTensor> tensors) {
  ParameterSet& ps = model.parameters();
  std::vector<NamedTensor> buffers;
  std::size_t n_params = 0;
  const std::string prefix = kBufferPrefix;
  for (auto& t : tensors) {
    if (t.name.rfind(prefix, 0) == 0) {
      buffers.push_back({t.name.substr(prefix.size()), std::move(t.value)});
      continue;
    }
    if (!ps.contains(t.name)) throw ParseError("model checkpoint: unexpected parameter '" + t.name + "'");
    Tensor& dst = ps.get(t.name);
    if (dst.shape() != t.value.shape()) {
      throw ParseError("model checkpoint: parameter '" + t.name + "' has shape " + shape_str(t.value.shape()) +
                       ", configuration expects " + shape_str(dst.shape()));
    }
    dst = std::move(t.value);
    ++n_params;
  }
  if (n_params != ps.size()) {
    throw ParseError("model checkpoint: " + std::to_string(n_params) + " of " + std::to_string(ps.size()) +
                     " parameters present");
  }
  model.load_buffers(buffers);
}

}  // namespace model_io_detail

inline AnyModel load_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kModelCheckpointHeader) {
    throw ParseError("not a model checkpoint (expected header '" + std::string(kModelCheckpointHeader) + "')");
  }
  std::ostringstream header;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    header << line << '\n';
  }
  if (!ended) throw ParseError("model checkpoint: header not terminated by 'end'");
  KeyValueConfig kv = KeyValueConfig::parse(header.str());
  const std::string kind = kv.get("model", std::string());
  auto tensors = read_tensors(is);
  if (kind == TinyReference::kName) {
    TinyReference m(TinyConfig::from_kv(kv));
    model_io_detail::assign_tensors(m, std::move(tensors));
    return m;
  }
  if (kind == RawRes2Net::kName) {
    RawRes2Net m(ModelConfig::from_kv(kv));
    model_io_detail::assign_tensors(m, std::move(tensors));
    return m;
  }
  throw ParseError("model checkpoint: unknown model '" + kind + "'");
}

inline void save_model_file(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  save_model(os, model);
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

inline AnyModel load_model_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model checkpoint '" + path.string() + "'");
  try {
    return load_model(is);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace spoofguard
