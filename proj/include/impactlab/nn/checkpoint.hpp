// Copyright 2026 The impactlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IMPACTLAB_NN_CHECKPOINT_HPP_
#define IMPACTLAB_NN_CHECKPOINT_HPP_

// Checkpoint file layout:
//
//   impactlab-checkpoint 1\n
//   seed <u64>\n
//   tensors <count>\n
//   <section>/<name> <rank> <d0> <d1> ...\n      (one line per tensor)
//   data\n
//   <f64 little-endian payload, tensors in manifest order>
//
// Loading is strict: names, order and shapes must match the receiving
// parameter set exactly, and the payload length must be exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "impactlab/nn/tensor.hpp"

namespace impactlab::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointSection {
  std::string name;
  ConstParameterRefs params;

  CheckpointSection(std::string n, ConstParameterRefs p) : name(std::move(n)), params(std::move(p)) {}
  CheckpointSection(std::string n, const ParameterRefs& p) : name(std::move(n)), params(p.begin(), p.end()) {}
};

struct CheckpointManifest {
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, Shape>> tensors;
};

namespace detail {

inline void put_f64_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

inline double get_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<CheckpointSection>& sections, std::uint64_t seed) {
  std::size_t count = 0;
  for (const auto& s : sections) count += s.params.size();
  std::ostringstream head;
  head << "impactlab-checkpoint 1\nseed " << seed << "\ntensors " << count << "\n";
  for (const auto& s : sections) {
    for (const Parameter* p : s.params) {
      head << s.name << '/' << p->name << ' ' << p->value.rank();
      for (std::size_t d : p->value.shape()) head << ' ' << d;
      head << '\n';
    }
  }
  head << "data\n";
  std::string out = head.str();
  for (const auto& s : sections) {
    for (const Parameter* p : s.params) {
      for (double v : p->value.data()) detail::put_f64_le(out, v);
    }
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const std::vector<CheckpointSection>& sections,
                            std::uint64_t seed) {
  const std::string bytes = encode_checkpoint(sections, seed);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open checkpoint for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing checkpoint: " + path);
}

// Parses the manifest; `payload_offset` receives the byte offset of the data block.
inline CheckpointManifest parse_manifest(const std::string& bytes, std::size_t& payload_offset) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw CheckpointError("checkpoint: truncated manifest");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != "impactlab-checkpoint 1") throw CheckpointError("checkpoint: bad magic/version");
  CheckpointManifest m;
  std::size_t count = 0;
  {
    std::istringstream ls(next_line());
    std::string key;
    if (!(ls >> key >> m.seed) || key != "seed") throw CheckpointError("checkpoint: missing seed line");
  }
  {
    std::istringstream ls(next_line());
    std::string key;
    if (!(ls >> key >> count) || key != "tensors") throw CheckpointError("checkpoint: missing tensors line");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(next_line());
    std::string name;
    std::size_t rank = 0;
    if (!(ls >> name >> rank)) throw CheckpointError("checkpoint: malformed tensor line " + std::to_string(i));
    Shape shape(rank);
    for (auto& d : shape) {
      if (!(ls >> d) || d == 0) throw CheckpointError("checkpoint: malformed shape for " + name);
    }
    m.tensors.emplace_back(std::move(name), std::move(shape));
  }
  if (next_line() != "data") throw CheckpointError("checkpoint: missing data marker");
  payload_offset = pos;
  return m;
}

inline CheckpointManifest read_checkpoint_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t off = 0;
  return parse_manifest(bytes, off);
}

// Loads into the given sections; returns the stored seed.
inline std::uint64_t decode_checkpoint(const std::string& bytes, const std::vector<std::pair<std::string, ParameterRefs>>& sections) {
  std::size_t off = 0;
  CheckpointManifest m = parse_manifest(bytes, off);
  std::size_t idx = 0;
  std::size_t total = 0;
  for (const auto& [section, params] : sections) {
    for (const Parameter* p : params) {
      if (idx >= m.tensors.size()) throw CheckpointError("checkpoint: fewer tensors than expected");
      const auto& [name, shape] = m.tensors[idx++];
      if (name != section + "/" + p->name) {
        throw CheckpointError("checkpoint: expected tensor " + section + "/" + p->name + ", found " + name);
      }
      if (shape != p->value.shape()) {
        throw CheckpointError("checkpoint: shape mismatch for " + name + ": file " + shape_string(shape) +
                              ", model " + shape_string(p->value.shape()));
      }
      total += shape_size(shape);
    }
  }
  if (idx != m.tensors.size()) throw CheckpointError("checkpoint: more tensors than expected");
  if (bytes.size() - off != total * 8) throw CheckpointError("checkpoint: payload length mismatch");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + off;
  for (const auto& [section, params] : sections) {
    for (Parameter* param : params) {
      for (double& v : param->value.data()) {
        v = detail::get_f64_le(p);
        p += 8;
      }
    }
  }
  return m.seed;
}

inline std::uint64_t load_checkpoint(const std::string& path,
                                     const std::vector<std::pair<std::string, ParameterRefs>>& sections) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, sections);
}

}  // namespace impactlab::nn

#endif  // IMPACTLAB_NN_CHECKPOINT_HPP_
