// Copyright 2026 The flowfid Authors
// SPDX-License-Identifier: Apache-2.0
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

#include "flowfid/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowfid/error.hpp"

namespace flowfid {
namespace {

constexpr char kMagic[] = "flowfid-checkpoint";

void PutDouble(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

void PutBlocks(std::string& out, const char* section,
               const std::vector<Block>& blocks) {
  out += section;
  out += " " + std::to_string(blocks.size()) + "\n";
  for (const auto& b : blocks) {
    if (b.path.find_first_of(" \n") != std::string::npos) {
      throw FormatError("block name '" + b.path + "' contains whitespace");
    }
    out += "block " + b.path + " f64 " + std::to_string(b.shape.size());
    for (auto d : b.shape) out += " " + std::to_string(d);
    out += "\n";
    for (double v : b.data) PutDouble(out, v);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::string Line(const char* what) {
    const auto nl = bytes_.find('\n', pos_);
    if (nl == std::string::npos) throw FormatError(std::string("truncated at ") + what);
    std::string line = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return line;
  }

  std::string Bytes(std::size_t n, const std::string& what) {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated payload of " + what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  double Double(const std::string& what) {
    if (bytes_.size() - pos_ < 8) throw FormatError("truncated payload of " + what);
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
      bits = (bits << 8) | static_cast<unsigned char>(bytes_[pos_ + i]);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

// "<tag> <count>" header line.
std::size_t SectionCount(Reader& r, const std::string& tag) {
  std::istringstream is(r.Line(tag.c_str()));
  std::string got;
  std::size_t count = 0;
  if (!(is >> got >> count) || got != tag) {
    throw FormatError("expected section '" + tag + "'");
  }
  return count;
}

std::vector<Block> ReadBlocks(Reader& r, const std::string& tag) {
  const std::size_t count = SectionCount(r, tag);
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream is(r.Line("block header"));
    std::string kw, dtype;
    std::size_t rank = 0;
    Block b;
    if (!(is >> kw >> b.path >> dtype >> rank) || kw != "block") {
      throw FormatError("malformed block header in section " + tag);
    }
    if (dtype != "f64") {
      throw FormatError("block " + b.path + ": unsupported dtype '" + dtype + "'");
    }
    b.shape.resize(rank);
    for (auto& d : b.shape) {
      if (!(is >> d) || d < 0) throw FormatError("block " + b.path + ": bad shape");
    }
    const auto n = NumElements(b.shape);
    b.data.resize(static_cast<std::size_t>(n));
    for (auto& v : b.data) v = r.Double(b.path);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace

const std::string& Checkpoint::StateValue(const std::string& key) const {
  for (const auto& [k, v] : state) {
    if (k == key) return v;
  }
  throw FormatError("checkpoint has no state entry '" + key + "'");
}

const Block& Checkpoint::OptimizerBlock(const std::string& path) const {
  for (const auto& b : optimizer) {
    if (b.path == path) return b;
  }
  throw FormatError("checkpoint has no optimizer block '" + path + "'");
}

std::string SerializeCheckpoint(const Checkpoint& ckpt) {
  std::string out;
  out += kMagic;
  out += "\nversion " + std::to_string(Checkpoint::kVersion) + "\n";
  out += "config " + std::to_string(ckpt.config_text.size()) + "\n";
  out += ckpt.config_text;
  PutBlocks(out, "params", ckpt.params);
  PutBlocks(out, "optimizer", ckpt.optimizer);
  out += "state " + std::to_string(ckpt.state.size()) + "\n";
  for (const auto& [k, v] : ckpt.state) {
    out += "entry " + k + " " + std::to_string(v.size()) + "\n" + v;
  }
  return out;
}

Checkpoint ParseCheckpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.Line("magic") != kMagic) throw FormatError("not a flowfid checkpoint (bad magic)");
  {
    std::istringstream is(r.Line("version"));
    std::string kw;
    int version = 0;
    if (!(is >> kw >> version) || kw != "version") {
      throw FormatError("missing version line");
    }
    if (version != Checkpoint::kVersion) {
      throw FormatError("checkpoint version " + std::to_string(version) +
                        " unsupported (expected " +
                        std::to_string(Checkpoint::kVersion) + ")");
    }
  }
  Checkpoint ckpt;
  ckpt.config_text = r.Bytes(SectionCount(r, "config"), "config");
  ckpt.params = ReadBlocks(r, "params");
  ckpt.optimizer = ReadBlocks(r, "optimizer");
  const std::size_t entries = SectionCount(r, "state");
  for (std::size_t i = 0; i < entries; ++i) {
    std::istringstream is(r.Line("state entry"));
    std::string kw, key;
    std::size_t size = 0;
    if (!(is >> kw >> key >> size) || kw != "entry") {
      throw FormatError("malformed state entry");
    }
    ckpt.state.emplace_back(key, r.Bytes(size, key));
  }
  if (!r.AtEnd()) throw FormatError("trailing bytes after checkpoint");
  return ckpt;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string bytes = SerializeCheckpoint(ckpt);
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  // Write-then-rename so an interrupted save never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseCheckpoint(ss.str());
}

std::vector<Block> CaptureBlocks(const StateList& state) {
  std::vector<Block> blocks;
  blocks.reserve(state.size());
  for (const auto& s : state) {
    auto v = s.tensor.values();
    blocks.push_back({s.path, s.tensor.shape(), {v.begin(), v.end()}});
  }
  return blocks;
}

void RestoreBlocks(const std::vector<Block>& blocks, const StateList& state) {
  for (std::size_t i = 0; i < std::max(blocks.size(), state.size()); ++i) {
    if (i >= blocks.size()) {
      throw FormatError("checkpoint lacks block '" + state[i].path + "'");
    }
    if (i >= state.size()) {
      throw FormatError("checkpoint has unexpected block '" + blocks[i].path + "'");
    }
    const Block& b = blocks[i];
    const NamedTensor& s = state[i];
    if (b.path != s.path) {
      throw FormatError("block name mismatch: checkpoint '" + b.path +
                        "' vs model '" + s.path + "'");
    }
    if (b.shape != s.tensor.shape()) {
      throw FormatError("block '" + b.path + "' shape " + ShapeToString(b.shape) +
                        " does not match model shape " +
                        ShapeToString(s.tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    Tensor t = state[i].tensor;
    std::copy(blocks[i].data.begin(), blocks[i].data.end(), t.mutable_values().begin());
  }
}

}  // namespace flowfid
