// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#include "pcsim/tensor.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "pcsim/bf16.hpp"
#include "pcsim/error.hpp"

namespace pcsim {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'T', 'E', 'N', '0', '1', '\0'};
constexpr std::size_t kMaxHeaderBytes = 1u << 16;

void put_u32(std::vector<unsigned char> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
}

std::uint32_t get_u32(const unsigned char *p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

} // namespace

const char *to_string(ElemFormat f) {
  return f == ElemFormat::f32 ? "f32" : "bf16";
}

ElemFormat parse_elem_format(const std::string &s) {
  if (s == "f32") {
    return ElemFormat::f32;
  }
  if (s == "bf16") {
    return ElemFormat::bf16;
  }
  throw FormatError("unknown element format '" + s + "'");
}

std::size_t shape_numel(const Shape &shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) {
      throw FormatError("tensor extents must be positive");
    }
    if (__builtin_mul_overflow(n, e, &n)) {
      throw FormatError("tensor extent product overflows");
    }
  }
  return n;
}

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, ElemFormat fmt)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0f), format_(fmt) {}

Tensor::Tensor(Shape shape, std::vector<float> data, ElemFormat fmt)
    : shape_(std::move(shape)), data_(std::move(data)), format_(fmt) {
  validate();
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " +
                     shape_str(shape));
  }
  return Tensor(std::move(shape), data_, format_);
}

void Tensor::validate() const {
  if (shape_numel(shape_) != data_.size()) {
    throw FormatError("shape " + shape_str(shape_) + " does not match " +
                      std::to_string(data_.size()) + " stored values");
  }
  if (format_ == ElemFormat::bf16) {
    for (float v : data_) {
      if (!is_bf16_exact(v)) {
        throw FormatError("bf16 tensor holds a value not representable in "
                          "bfloat16");
      }
    }
  }
}

Tensor to_bf16(const Tensor &t) {
  std::vector<float> d(t.values());
  for (float &v : d) {
    v = bf16_round(v);
  }
  return Tensor(t.shape(), std::move(d), ElemFormat::bf16);
}

std::vector<unsigned char> encode_tensor(const Tensor &t) {
  t.validate();
  std::string header = "{\"shape\":" + shape_str(t.shape()) +
                       ",\"format\":\"" + to_string(t.format()) + "\"}";
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  const std::size_t width = t.format() == ElemFormat::f32 ? 4 : 2;
  out.reserve(out.size() + width * t.size());
  for (float v : t.data()) {
    if (t.format() == ElemFormat::f32) {
      put_u32(out, std::bit_cast<std::uint32_t>(v));
    } else {
      const std::uint16_t b = bf16_bits(v);
      out.push_back(static_cast<unsigned char>(b));
      out.push_back(static_cast<unsigned char>(b >> 8));
    }
  }
  return out;
}

Tensor decode_tensor(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("missing PCTEN01 magic");
  }
  const std::uint32_t hlen = get_u32(bytes.data() + 8);
  if (hlen > kMaxHeaderBytes || 12 + std::size_t(hlen) > bytes.size()) {
    throw FormatError("tensor header length out of range");
  }
  const std::string htext(reinterpret_cast<const char *>(bytes.data() + 12), hlen);
  Shape shape;
  ElemFormat fmt = ElemFormat::f32;
  try {
    const auto h = nlohmann::json::parse(htext);
    for (const auto &e : h.at("shape")) {
      const auto v = e.get<std::int64_t>();
      if (v <= 0) {
        throw FormatError("tensor extents must be positive");
      }
      shape.push_back(static_cast<std::size_t>(v));
    }
    fmt = parse_elem_format(h.at("format").get<std::string>());
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("malformed tensor header: ") + e.what());
  }
  const std::size_t n = shape_numel(shape);
  const std::size_t width = fmt == ElemFormat::f32 ? 4 : 2;
  const std::size_t payload = bytes.size() - 12 - hlen;
  if (n > payload / width || n * width != payload) {
    throw FormatError("payload holds " + std::to_string(payload) +
                      " bytes, header declares " + std::to_string(n) +
                      " elements of " + std::to_string(width) + " bytes");
  }
  const unsigned char *p = bytes.data() + 12 + hlen;
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (fmt == ElemFormat::f32) {
      data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    } else {
      data[i] = bf16_from_bits(
          static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8)));
    }
  }
  return Tensor(std::move(shape), std::move(data), fmt);
}

Tensor load_tensor(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open tensor file " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError &e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_tensor(const Tensor &t, const std::filesystem::path &path) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot write tensor file " + path.string());
  }
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

} // namespace pcsim
