// Copyright 2026 The PerceptLab Authors
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

// Checkpoint file layout (all integers little-endian):
//
//   "perceptlab-ckpt-v1\n"
//   u64  header length N
//   N bytes of JSON header: architecture, config echo, step, loss history
//        and the ordered list of tensors {name, size}
//   raw f64 tensor payloads in header order
//   u64  FNV-1a of every preceding byte

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "perceptlab/config.hpp"
#include "perceptlab/error.hpp"
#include "perceptlab/model.hpp"
#include "perceptlab/util.hpp"

namespace perceptlab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline constexpr std::string_view kCheckpointFormat = "perceptlab-ckpt-v1";

struct LossEntry {
  long long step = 0;
  double loss = 0.0;
  bool operator==(const LossEntry&) const = default;
};

struct Checkpoint {
  Model model;
  TrainConfig config;
  long long step = 0;
  std::vector<LossEntry> loss_history;
};

namespace detail {

inline void append_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

inline std::uint64_t read_u64(std::string_view in, std::size_t& pos) {
  if (in.size() - pos < 8) throw FormatError("checkpoint truncated");
  std::uint64_t v;
  std::memcpy(&v, in.data() + pos, 8);
  pos += 8;
  return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(Checkpoint& ckpt) {
  json header;
  header["format"] = kCheckpointFormat;
  header["architecture"] = architecture_to_json(ckpt.model.architecture());
  header["config"] = to_json(ckpt.config);
  header["step"] = ckpt.step;
  json history = json::array();
  for (const auto& e : ckpt.loss_history) history.push_back({e.step, e.loss});
  header["loss_history"] = std::move(history);
  json tensors = json::array();
  const auto params = ckpt.model.parameters();
  for (const auto& p : params) tensors.push_back({{"name", p.name}, {"size", p.values.size()}});
  header["tensors"] = std::move(tensors);

  const std::string text = header.dump();
  std::string out;
  out.append(kCheckpointFormat);
  out.push_back('\n');
  detail::append_u64(out, text.size());
  out.append(text);
  for (const auto& p : params) {
    out.append(reinterpret_cast<const char*>(p.values.data()), p.values.size_bytes());
  }
  detail::append_u64(out, fnv1a(out));
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const std::string_view prefix = "perceptlab-ckpt-";
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos || !bytes.starts_with(prefix)) {
    throw FormatError("not a perceptlab checkpoint");
  }
  const std::string_view tag = bytes.substr(0, newline);
  if (tag != kCheckpointFormat) {
    throw FormatError("unsupported checkpoint version '" + std::string(tag) + "' (expected " +
                      std::string(kCheckpointFormat) + ")");
  }
  std::size_t pos = newline + 1;
  const std::uint64_t header_len = detail::read_u64(bytes, pos);
  if (bytes.size() - pos < header_len) throw FormatError("checkpoint truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  try {
    ckpt.config = train_config_from_json(header.at("config"));
    const Architecture arch = architecture_from_json(header.at("architecture"));
    ckpt.model = Model::build(arch, 0, 0.0);
    ckpt.step = header.at("step").get<long long>();
    for (const auto& e : header.at("loss_history")) {
      ckpt.loss_history.push_back({e.at(0).get<long long>(), e.at(1).get<double>()});
    }
    const auto params = ckpt.model.parameters();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size()) throw FormatError("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (tensors[i].at("name").get<std::string>() != params[i].name ||
          tensors[i].at("size").get<std::size_t>() != params[i].values.size()) {
        throw FormatError("checkpoint tensor '" + params[i].name + "' does not match architecture");
      }
      const std::size_t n = params[i].values.size_bytes();
      if (bytes.size() - pos < n) throw FormatError("checkpoint truncated");
      std::memcpy(params[i].values.data(), bytes.data() + pos, n);
      pos += n;
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid configuration: ") + e.what());
  }
  const std::uint64_t expected = fnv1a(bytes.substr(0, pos));
  const std::uint64_t stored = detail::read_u64(bytes, pos);
  if (stored != expected) throw FormatError("checkpoint checksum mismatch");
  if (pos != bytes.size()) throw FormatError("trailing bytes after checkpoint");
  return ckpt;
}

/// Writes via a temporary file and rename, so readers never see a partial
/// checkpoint.
inline void save_checkpoint(Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace perceptlab
