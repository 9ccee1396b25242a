/* Copyright 2026 The blendnet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "blendnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace blend {

using nlohmann::json;

const char* to_string(IoErrc code) {
  switch (code) {
    case IoErrc::BadMagic: return "bad-magic";
    case IoErrc::UnsupportedVersion: return "unsupported-version";
    case IoErrc::Truncated: return "truncated";
    case IoErrc::ShapeMismatch: return "shape-mismatch";
    case IoErrc::Malformed: return "malformed";
    case IoErrc::FileError: return "file-error";
  }
  return "unknown";
}

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    using U = std::conditional_t<sizeof(T) == 8, uint64_t, std::conditional_t<sizeof(T) == 4, uint32_t,
                                 std::conditional_t<sizeof(T) == 2, uint16_t, uint8_t>>>;
    const U u = std::bit_cast<U>(v);
    for (size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<uint8_t>(u >> (8 * i)));
  }
  void put_raw(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }

  std::vector<uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, uint64_t, std::conditional_t<sizeof(T) == 4, uint32_t,
                                 std::conditional_t<sizeof(T) == 2, uint16_t, uint8_t>>>;
    need(sizeof(T));
    U u = 0;
    for (size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }
  std::string_view raw(size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(size_t n) const {
    if (pos_ + n > b_.size())
      throw ModelIoError(IoErrc::Truncated, "needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                                                ", file has " + std::to_string(b_.size()));
  }
  size_t pos() const { return pos_; }
  void seek(size_t p) { pos_ = p; }
  size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const uint8_t> b_;
  size_t pos_ = 0;
};

void put_payload(Writer& w, const Tensor& t) {
  switch (t.dtype) {
    case DType::Float32:
      for (double v : t.real) w.put(static_cast<float>(v));
      break;
    case DType::Float64:
      for (double v : t.real) w.put(v);
      break;
    case DType::Fixed16:
      for (int16_t v : t.fixed) w.put(v);
      break;
    case DType::PackedBits:
      for (uint64_t v : t.words) w.put(v);
      break;
    case DType::UInt8:
      for (uint8_t v : t.bytes) w.put(v);
      break;
  }
}

void get_payload(Reader& r, Tensor& t, size_t count) {
  switch (t.dtype) {
    case DType::Float32:
      t.real.resize(count);
      for (auto& v : t.real) v = static_cast<double>(r.get<float>());
      break;
    case DType::Float64:
      t.real.resize(count);
      for (auto& v : t.real) v = r.get<double>();
      break;
    case DType::Fixed16:
      t.fixed.resize(count);
      for (auto& v : t.fixed) v = r.get<int16_t>();
      break;
    case DType::PackedBits:
      t.words.resize(count);
      for (auto& v : t.words) v = r.get<uint64_t>();
      break;
    case DType::UInt8:
      t.bytes.resize(count);
      for (auto& v : t.bytes) v = r.get<uint8_t>();
      break;
  }
}

DType dtype_from_tag(uint64_t tag) {
  if (tag > 4) throw ModelIoError(IoErrc::Malformed, "unknown dtype tag " + std::to_string(tag));
  return static_cast<DType>(tag);
}

// Elements the payload must hold for a given descriptor.
size_t expected_elements(const Tensor& t) {
  if (t.dtype != DType::PackedBits) return static_cast<size_t>(numel(t.shape));
  if (t.word_size < 1 || t.word_size > 64 || t.shape.size() < 2)
    throw ModelIoError(IoErrc::ShapeMismatch, "packed tensor descriptor needs rank >= 2 and word_size in [1,64]");
  return make_packed(t.shape, t.word_size).words.size();
}

json attrs_to_json(const NodeAttrs& a) {
  return json{{"in_channels", a.in_channels}, {"out_channels", a.out_channels},
              {"kernel", a.kernel},           {"stride", a.stride},
              {"padding", a.padding},         {"pad_bit", a.pad_bit},
              {"precision", a.precision == Precision::Binary ? "binary" : "fixed"},
              {"affine_free", a.affine_free}, {"eps", a.eps},
              {"shape", a.shape}};
}

NodeAttrs attrs_from_json(const json& j) {
  NodeAttrs a;
  a.in_channels = j.at("in_channels").get<int>();
  a.out_channels = j.at("out_channels").get<int>();
  a.kernel = j.at("kernel").get<int>();
  a.stride = j.at("stride").get<int>();
  a.padding = j.at("padding").get<int>();
  a.pad_bit = j.at("pad_bit").get<int>();
  a.precision = j.at("precision").get<std::string>() == "binary" ? Precision::Binary : Precision::Fixed;
  a.affine_free = j.at("affine_free").get<bool>();
  a.eps = j.at("eps").get<double>();
  a.shape = j.at("shape").get<Shape>();
  return a;
}

}  // namespace

std::vector<uint8_t> serialize_model(const Graph& graph) {
  json manifest;
  manifest["arch"] = graph.arch;
  manifest["seed"] = graph.seed;
  manifest["compiled"] = graph.compiled;
  manifest["word_size"] = graph.word_size;
  manifest["frac_bits"] = graph.frac_bits;
  manifest["outputs"] = graph.outputs;
  json nodes = json::array();
  json tensors = json::array();
  Writer blobs;
  for (const auto& n : graph.nodes) {
    json jn{{"id", n.id},
            {"kind", to_string(n.kind)},
            {"name", n.name},
            {"inputs", n.inputs},
            {"attrs", attrs_to_json(n.attrs)}};
    json params = json::object();
    for (const auto& [key, t] : n.params) {
      const size_t offset = blobs.bytes.size();
      put_payload(blobs, t);
      json desc{{"name", n.name + "." + key},
                {"dtype", static_cast<uint32_t>(t.dtype)},
                {"shape", t.shape},
                {"offset", offset},
                {"nbytes", blobs.bytes.size() - offset}};
      if (t.dtype == DType::PackedBits) desc["word_size"] = t.word_size;
      if (t.dtype == DType::Fixed16) desc["frac_bits"] = t.frac_bits;
      params[key] = tensors.size();
      tensors.push_back(std::move(desc));
    }
    jn["params"] = std::move(params);
    nodes.push_back(std::move(jn));
  }
  manifest["nodes"] = std::move(nodes);
  manifest["tensors"] = std::move(tensors);

  const std::string text = manifest.dump();
  Writer w;
  w.put_raw("NBLM");
  w.put(kModelVersion);
  w.put(static_cast<uint64_t>(text.size()));
  w.put_raw(text);
  w.bytes.insert(w.bytes.end(), blobs.bytes.begin(), blobs.bytes.end());
  return std::move(w.bytes);
}

Graph deserialize_model(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "NBLM") throw ModelIoError(IoErrc::BadMagic, "expected NBLM header");
  const auto version = r.get<uint32_t>();
  if (version != kModelVersion)
    throw ModelIoError(IoErrc::UnsupportedVersion, "version " + std::to_string(version));
  const auto manifest_len = r.get<uint64_t>();
  if (manifest_len > r.remaining()) throw ModelIoError(IoErrc::Truncated, "manifest extends past end of file");
  json manifest;
  try {
    manifest = json::parse(r.raw(static_cast<size_t>(manifest_len)));
  } catch (const json::exception& e) {
    throw ModelIoError(IoErrc::Malformed, std::string("manifest: ") + e.what());
  }
  const size_t blob_start = r.pos();

  Graph g;
  try {
    g.arch = manifest.at("arch").get<std::string>();
    g.seed = manifest.at("seed").get<uint64_t>();
    g.compiled = manifest.at("compiled").get<bool>();
    g.word_size = manifest.at("word_size").get<int>();
    g.frac_bits = manifest.at("frac_bits").get<int>();
    g.outputs = manifest.at("outputs").get<std::vector<int>>();
    const json& tensors = manifest.at("tensors");
    for (const auto& jn : manifest.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int>();
      n.kind = op_kind_from_string(jn.at("kind").get<std::string>());
      n.name = jn.at("name").get<std::string>();
      n.inputs = jn.at("inputs").get<std::vector<int>>();
      n.attrs = attrs_from_json(jn.at("attrs"));
      for (const auto& [key, idx] : jn.at("params").items()) {
        const json& d = tensors.at(idx.get<size_t>());
        Tensor t;
        t.dtype = dtype_from_tag(d.at("dtype").get<uint64_t>());
        t.shape = d.at("shape").get<Shape>();
        if (d.contains("word_size")) t.word_size = d.at("word_size").get<int>();
        if (d.contains("frac_bits")) t.frac_bits = d.at("frac_bits").get<int>();
        const size_t count = expected_elements(t);
        const auto nbytes = d.at("nbytes").get<uint64_t>();
        if (nbytes != count * element_bytes(t.dtype))
          throw ModelIoError(IoErrc::ShapeMismatch, "tensor " + d.at("name").get<std::string>() + " declares " +
                                                        std::to_string(nbytes) + " bytes for shape " +
                                                        to_string(t.shape));
        r.seek(blob_start + d.at("offset").get<size_t>());
        if (r.pos() > bytes.size() || r.remaining() < nbytes)
          throw ModelIoError(IoErrc::Truncated, "blob for tensor " + d.at("name").get<std::string>() + " is cut short");
        get_payload(r, t, count);
        n.params.emplace(key, std::move(t));
      }
      g.nodes.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw ModelIoError(IoErrc::Malformed, std::string("manifest: ") + e.what());
  } catch (const ModelIoError&) {
    throw;
  } catch (const Error& e) {
    throw ModelIoError(IoErrc::Malformed, e.what());
  }
  return g;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIoError(IoErrc::FileError, "cannot open " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelIoError(IoErrc::FileError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelIoError(IoErrc::FileError, "short write to " + path.string());
}

void save_model(const Graph& graph, const std::filesystem::path& path) { write_file(path, serialize_model(graph)); }

Graph load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

std::vector<uint8_t> serialize_tensor(const Tensor& t) {
  if (t.dtype == DType::PackedBits) throw Error("nbt files do not carry packed tensors");
  Writer w;
  w.put_raw("NBT1");
  w.put(static_cast<uint32_t>(t.dtype));
  w.put(static_cast<uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.put(static_cast<uint64_t>(d));
  put_payload(w, t);
  return std::move(w.bytes);
}

Tensor deserialize_tensor(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "NBT1") throw ModelIoError(IoErrc::BadMagic, "expected NBT1 header");
  Tensor t;
  t.dtype = dtype_from_tag(r.get<uint32_t>());
  if (t.dtype == DType::PackedBits) throw ModelIoError(IoErrc::Malformed, "nbt files do not carry packed tensors");
  const auto rank = r.get<uint32_t>();
  if (rank > 8) throw ModelIoError(IoErrc::Malformed, "rank " + std::to_string(rank));
  for (uint32_t i = 0; i < rank; ++i) t.shape.push_back(static_cast<int64_t>(r.get<uint64_t>()));
  const size_t count = static_cast<size_t>(numel(t.shape));
  r.need(count * element_bytes(t.dtype));
  get_payload(r, t, count);
  if (r.remaining() != 0) throw ModelIoError(IoErrc::ShapeMismatch, "trailing bytes after payload");
  return t;
}

void save_tensor(const Tensor& tensor, const std::filesystem::path& path) { write_file(path, serialize_tensor(tensor)); }

Tensor load_tensor(const std::filesystem::path& path) { return deserialize_tensor(read_file(path)); }

}  // namespace blend
