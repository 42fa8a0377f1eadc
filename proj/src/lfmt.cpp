#include "lofi/lfmt.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "lofi/errors.hpp"

namespace lofi {

namespace {

constexpr std::array<char, 4> kMagic = {'L', 'F', 'M', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(p[i]) << (8 * i);
  return value;
}

class Reader {
 public:
  Reader(std::istream& in, std::uint64_t base) : in_(in), pos_(base) {}

  void read(unsigned char* dst, std::size_t n, const char* what) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(in_.gcount());
    if (got != n) throw FormatError(std::string("truncated ") + what, pos_ + got);
    pos_ += n;
  }

  std::uint64_t pos() const { return pos_; }

 private:
  std::istream& in_;
  std::uint64_t pos_;
};

}  // namespace

void write_lfmt(std::ostream& out, const Matrix& m, LfmtDtype dtype) {
  if (m.rows() == 0 || m.cols() == 0) throw InvalidInput("cannot save an empty matrix as LFMT");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  const std::array<char, 7> reserved{};
  out.write(reserved.data(), reserved.size());

  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (dtype == LfmtDtype::f64) {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m(r, c)));
      } else {
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
      }
    }
  }
  if (!out) throw IoError("failed writing LFMT data");
}

Matrix read_lfmt(std::istream& in, std::uint64_t base_offset) {
  Reader reader(in, base_offset);
  std::array<unsigned char, kLfmtHeaderBytes> header{};
  reader.read(header.data(), 4, "magic");
  if (std::memcmp(header.data(), kMagic.data(), 4) != 0) {
    throw FormatError("bad LFMT magic", base_offset);
  }
  reader.read(header.data() + 4, kLfmtHeaderBytes - 4, "header");
  const auto version = get_le<std::uint32_t>(header.data() + 4);
  if (version != kVersion) {
    throw FormatError("unsupported LFMT version " + std::to_string(version), base_offset + 4);
  }
  const auto rows = get_le<std::uint64_t>(header.data() + 8);
  const auto cols = get_le<std::uint64_t>(header.data() + 16);
  const auto dtype = header[24];
  if (dtype != 1 && dtype != 2) {
    throw FormatError("unknown LFMT dtype " + std::to_string(dtype), base_offset + 24);
  }
  for (std::size_t i = 25; i < kLfmtHeaderBytes; ++i) {
    if (header[i] != 0) throw FormatError("nonzero LFMT reserved byte", base_offset + i);
  }
  constexpr auto kMaxEntries = std::uint64_t{1} << 40;
  if (rows == 0 || cols == 0 || rows > kMaxEntries || cols > kMaxEntries / rows) {
    throw FormatError("invalid LFMT dimensions", base_offset + 8);
  }

  const std::size_t width = dtype == 2 ? 8 : 4;
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<unsigned char> row_buf(static_cast<std::size_t>(cols) * width);
  for (Index r = 0; r < m.rows(); ++r) {
    reader.read(row_buf.data(), row_buf.size(), "LFMT payload");
    for (Index c = 0; c < m.cols(); ++c) {
      const unsigned char* p = row_buf.data() + static_cast<std::size_t>(c) * width;
      m(r, c) = width == 8 ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                           : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
    }
  }
  return m;
}

void save_lfmt(const Matrix& m, const std::filesystem::path& path, LfmtDtype dtype) {
  if (m.rows() == 0 || m.cols() == 0) throw InvalidInput("cannot save an empty matrix as LFMT");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_lfmt(out, m, dtype);
}

Matrix load_lfmt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_lfmt(in);
}

std::string encode_lfmt(const Matrix& m, LfmtDtype dtype) {
  std::ostringstream out(std::ios::binary);
  write_lfmt(out, m, dtype);
  return std::move(out).str();
}

Matrix decode_lfmt(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_lfmt(in);
}

}  // namespace lofi
