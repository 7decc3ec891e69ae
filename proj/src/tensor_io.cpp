#include "conflens/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace conflens {

namespace {

constexpr std::uint8_t kMagic[4] = {0x53, 0x45, 0x47, 0x54};
constexpr std::size_t kHeaderFixed = 4 + 4 + 1 + 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::size_t checked_product(const std::vector<std::uint32_t>& dims, const std::string& origin) {
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / 4 / d) {
      throw TensorFormatError(TensorFormatError::Code::DimOverflow,
                              origin + ": dimension product overflows");
    }
    n *= d;
  }
  if (n > std::numeric_limits<std::size_t>::max() / 4) {
    throw TensorFormatError(TensorFormatError::Code::DimOverflow,
                            origin + ": dimension product overflows");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const std::vector<float>& Tensor::f32() const {
  if (const auto* v = std::get_if<std::vector<float>>(&data)) return *v;
  throw data_error("tensor has dtype u16, expected f32");
}

const std::vector<std::uint16_t>& Tensor::u16() const {
  if (const auto* v = std::get_if<std::vector<std::uint16_t>>(&data)) return *v;
  throw data_error("tensor has dtype f32, expected u16");
}

Tensor Tensor::from_f32(std::vector<std::uint32_t> dims, std::vector<float> values) {
  Tensor t{std::move(dims), std::move(values)};
  if (t.dims.empty() || t.dims.size() > kSegtMaxDims) throw usage_error("tensor rank must be 1-3");
  if (t.element_count() != t.f32().size()) throw usage_error("tensor payload does not match dims");
  return t;
}

Tensor Tensor::from_u16(std::vector<std::uint32_t> dims, std::vector<std::uint16_t> values) {
  Tensor t{std::move(dims), std::move(values)};
  if (t.dims.empty() || t.dims.size() > kSegtMaxDims) throw usage_error("tensor rank must be 1-3");
  if (t.element_count() != t.u16().size()) throw usage_error("tensor payload does not match dims");
  return t;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > kSegtMaxDims) {
    throw usage_error("tensor rank must be 1-3");
  }
  const std::size_t n = tensor.element_count();
  const std::size_t width = tensor.dtype() == DType::F32 ? 4 : 2;

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderFixed + 4 * tensor.dims.size() + n * width);
  for (auto b : kMagic) out.push_back(b);
  put_u32(out, kSegtVersion);
  out.push_back(static_cast<std::uint8_t>(tensor.dtype()));
  out.push_back(static_cast<std::uint8_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);

  if (tensor.dtype() == DType::F32) {
    const auto& v = tensor.f32();
    if (v.size() != n) throw usage_error("tensor payload does not match dims");
    for (float x : v) put_u32(out, std::bit_cast<std::uint32_t>(x));
  } else {
    const auto& v = tensor.u16();
    if (v.size() != n) throw usage_error("tensor payload does not match dims");
    for (auto x : v) {
      out.push_back(static_cast<std::uint8_t>(x & 0xFF));
      out.push_back(static_cast<std::uint8_t>(x >> 8));
    }
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin) {
  using Code = TensorFormatError::Code;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw TensorFormatError(Code::BadMagic, origin + ": missing SEGT magic");
  }
  if (bytes.size() < kHeaderFixed) {
    throw TensorFormatError(Code::Truncated, origin + ": truncated header");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kSegtVersion) {
    throw TensorFormatError(Code::UnsupportedVersion,
                            origin + ": unsupported SEGT version " + std::to_string(version));
  }
  const std::uint8_t dtype = bytes[8];
  if (dtype > 1) {
    throw TensorFormatError(Code::UnsupportedDtype,
                            origin + ": unsupported dtype " + std::to_string(dtype));
  }
  const std::uint8_t ndim = bytes[9];
  if (ndim < 1 || ndim > kSegtMaxDims) {
    throw TensorFormatError(Code::UnsupportedRank,
                            origin + ": unsupported rank " + std::to_string(ndim));
  }
  std::size_t offset = kHeaderFixed;
  if (bytes.size() < offset + 4u * ndim) {
    throw TensorFormatError(Code::Truncated, origin + ": truncated dims");
  }
  std::vector<std::uint32_t> dims(ndim);
  for (auto& d : dims) {
    d = get_u32(bytes.data() + offset);
    offset += 4;
  }

  const std::size_t n = checked_product(dims, origin);
  const std::size_t width = dtype == 0 ? 4 : 2;
  const std::size_t payload = n * width;
  const std::size_t available = bytes.size() - offset;
  if (available < payload) {
    throw TensorFormatError(Code::Truncated, origin + ": truncated payload (" +
                                                 std::to_string(available) + " of " +
                                                 std::to_string(payload) + " bytes)");
  }
  if (available > payload) {
    throw TensorFormatError(Code::TrailingBytes, origin + ": trailing bytes after payload");
  }

  const std::uint8_t* p = bytes.data() + offset;
  if (dtype == 0) {
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    return Tensor{std::move(dims), std::move(values)};
  }
  std::vector<std::uint16_t> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8));
  }
  return Tensor{std::move(dims), std::move(values)};
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

Tensor load_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_tensor(bytes, path.string());
}

void store_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  write_file_bytes(path, bytes);
}

}  // namespace conflens
