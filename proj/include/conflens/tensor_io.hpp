#pragma once

// SEGT binary tensor files.
//
// Layout (little-endian): "SEGT" | u32 version (=1) | u8 dtype | u8 ndim |
// ndim x u32 dims | payload, row-major with the last dimension fastest.
// No padding and no footer.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "conflens/error.hpp"

namespace conflens {

enum class DType : std::uint8_t { F32 = 0, U16 = 1 };

inline constexpr std::uint32_t kSegtVersion = 1;
inline constexpr std::size_t kSegtMaxDims = 3;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<float>, std::vector<std::uint16_t>> data;

  DType dtype() const { return data.index() == 0 ? DType::F32 : DType::U16; }
  std::size_t element_count() const;

  const std::vector<float>& f32() const;
  const std::vector<std::uint16_t>& u16() const;

  static Tensor from_f32(std::vector<std::uint32_t> dims, std::vector<float> values);
  static Tensor from_u16(std::vector<std::uint32_t> dims, std::vector<std::uint16_t> values);

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

class TensorFormatError : public Error {
 public:
  enum class Code { BadMagic, UnsupportedVersion, UnsupportedDtype, UnsupportedRank,
                    Truncated, DimOverflow, TrailingBytes };

  TensorFormatError(Code code, const std::string& what)
      : Error(ErrorKind::Data, what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

Tensor load_tensor(const std::filesystem::path& path);
void store_tensor(const std::filesystem::path& path, const Tensor& tensor);

// Whole-file helpers shared by the JSON sidecars.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace conflens
