#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "lofi/linalg.hpp"

namespace lofi {

/// LFMT v1 matrix container, little-endian:
///
///   offset  size  field
///   0       4     magic "LFMT"
///   4       4     version (u32) = 1
///   8       8     rows (u64)
///   16      8     cols (u64)
///   24      1     dtype (u8): 1 = f32, 2 = f64
///   25      7     reserved, zero
///   32      ...   rows * cols values, row-major
enum class LfmtDtype : std::uint8_t { f32 = 1, f64 = 2 };

inline constexpr std::uint64_t kLfmtHeaderBytes = 32;

void write_lfmt(std::ostream& out, const Matrix& m, LfmtDtype dtype = LfmtDtype::f64);
/// `base_offset` is added to error offsets when the block is embedded in a
/// larger file.
Matrix read_lfmt(std::istream& in, std::uint64_t base_offset = 0);

void save_lfmt(const Matrix& m, const std::filesystem::path& path,
               LfmtDtype dtype = LfmtDtype::f64);
Matrix load_lfmt(const std::filesystem::path& path);

std::string encode_lfmt(const Matrix& m, LfmtDtype dtype = LfmtDtype::f64);
Matrix decode_lfmt(const std::string& bytes);

}  // namespace lofi
