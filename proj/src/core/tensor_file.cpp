// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/core/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ecd/core/error.hpp"

namespace ecd {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor files are written with a little-endian host layout");

const char* dtype_name(const TensorData& data) {
  switch (data.index()) {
    case 0: return "f32";
    case 1: return "f64";
    default: return "i32";
  }
}

std::size_t dtype_size(std::string_view dtype) {
  if (dtype == "f32" || dtype == "i32") return 4;
  if (dtype == "f64") return 8;
  throw ParseError("unknown tensor dtype '" + std::string(dtype) + "'");
}

std::size_t payload_elements(const TensorData& data) {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

// Returns the next '\n'-terminated line starting at pos, advancing pos.
std::string_view next_line(std::string_view bytes, std::size_t& pos, std::string_view what) {
  const std::size_t end = bytes.find('\n', pos);
  if (end == std::string_view::npos) {
    throw ParseError("truncated tensor file: missing " + std::string(what) + " line");
  }
  std::string_view line = bytes.substr(pos, end - pos);
  pos = end + 1;
  return line;
}

template <typename T>
std::vector<T> decode(std::string_view payload, std::size_t offset, std::size_t count) {
  std::vector<T> out(count);
  if (count > 0) std::memcpy(out.data(), payload.data() + offset, count * sizeof(T));
  return out;
}

}  // namespace

const NamedTensor* TensorFile::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string serialize_tensor_file(const TensorFile& file) {
  std::ostringstream header;
  header << file.magic << '\n';
  header << "meta " << file.meta.dump() << '\n';
  header << "tensors " << file.tensors.size() << '\n';
  std::size_t offset = 0;
  for (const auto& t : file.tensors) {
    if (t.name.empty() || t.name.find_first_of(" \t\n") != std::string::npos) {
      throw ConfigError("tensor name must be a non-empty token: '" + t.name + "'");
    }
    const std::size_t count = payload_elements(t.data);
    if (static_cast<std::int64_t>(count) != element_count(t.shape)) {
      throw InvariantError("tensor '" + t.name + "' shape does not match its element count");
    }
    header << t.name << ' ' << dtype_name(t.data) << ' ' << t.shape.size();
    for (auto d : t.shape) header << ' ' << d;
    header << ' ' << offset << ' ' << count << '\n';
    offset += count * dtype_size(dtype_name(t.data));
  }
  header << "end\n";

  std::string out = header.str();
  const std::size_t payload_begin = out.size();
  out.resize(payload_begin + offset);
  char* cursor = out.data() + payload_begin;
  for (const auto& t : file.tensors) {
    std::visit(
        [&](const auto& v) {
          const std::size_t bytes = v.size() * sizeof(v[0]);
          if (bytes > 0) std::memcpy(cursor, v.data(), bytes);
          cursor += bytes;
        },
        t.data);
  }
  return out;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  const std::string bytes = serialize_tensor_file(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

TensorFile parse_tensor_file(std::string_view bytes, std::string_view expected_magic) {
  TensorFile file;
  std::size_t pos = 0;
  file.magic = std::string(next_line(bytes, pos, "magic"));
  if (file.magic != expected_magic) {
    throw ParseError("bad magic: expected '" + std::string(expected_magic) + "', found '" +
                     file.magic.substr(0, 64) + "'");
  }

  const std::string_view meta_line = next_line(bytes, pos, "meta");
  if (meta_line.substr(0, 5) != "meta ") throw ParseError("malformed meta line");
  try {
    file.meta = nlohmann::json::parse(meta_line.substr(5));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed meta JSON: ") + e.what());
  }

  std::size_t n_tensors = 0;
  {
    std::istringstream in(std::string(next_line(bytes, pos, "tensor count")));
    std::string word;
    if (!(in >> word >> n_tensors) || word != "tensors") throw ParseError("malformed tensor count line");
  }

  struct Entry {
    std::string name, dtype;
    std::vector<std::int64_t> shape;
    std::size_t offset = 0, count = 0;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::istringstream in(std::string(next_line(bytes, pos, "tensor directory")));
    Entry e;
    std::size_t ndim = 0;
    if (!(in >> e.name >> e.dtype >> ndim)) throw ParseError("malformed tensor directory entry " + std::to_string(i));
    e.shape.resize(ndim);
    for (auto& d : e.shape) {
      if (!(in >> d) || d < 0) throw ParseError("malformed shape for tensor '" + e.name + "'");
    }
    if (!(in >> e.offset >> e.count)) throw ParseError("malformed offset/count for tensor '" + e.name + "'");
    dtype_size(e.dtype);
    if (element_count(e.shape) != static_cast<std::int64_t>(e.count)) {
      throw DataError("tensor '" + e.name + "': shape declares " + std::to_string(element_count(e.shape)) +
                      " elements but count is " + std::to_string(e.count));
    }
    entries.push_back(std::move(e));
  }
  if (next_line(bytes, pos, "end") != "end") throw ParseError("missing 'end' after tensor directory");

  const std::string_view payload = bytes.substr(pos);
  for (auto& e : entries) {
    const std::size_t width = dtype_size(e.dtype);
    const std::size_t needed = e.offset + e.count * width;
    if (needed > payload.size()) {
      const std::size_t available = payload.size() > e.offset ? (payload.size() - e.offset) / width : 0;
      throw DataError("tensor '" + e.name + "': header declares " + std::to_string(e.count) +
                      " values but only " + std::to_string(available) + " present");
    }
    NamedTensor t{e.name, e.shape, {}};
    if (e.dtype == "f32") {
      t.data = decode<float>(payload, e.offset, e.count);
    } else if (e.dtype == "f64") {
      t.data = decode<double>(payload, e.offset, e.count);
    } else {
      t.data = decode<std::int32_t>(payload, e.offset, e.count);
    }
    file.tensors.push_back(std::move(t));
  }
  return file;
}

TensorFile read_tensor_file(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_tensor_file(bytes, expected_magic);
}

}  // namespace ecd
