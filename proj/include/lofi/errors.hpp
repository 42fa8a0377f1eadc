#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lofi {

/// Every failure raised by the library carries a stable category name so the
/// CLI can print a machine-parsable error line.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define LOFI_DEFINE_ERROR(Name)                                       \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  };

LOFI_DEFINE_ERROR(InvalidInput)
LOFI_DEFINE_ERROR(SingularSystem)
LOFI_DEFINE_ERROR(NotPSD)
LOFI_DEFINE_ERROR(DegenerateLabels)
LOFI_DEFINE_ERROR(ZeroLinearComponent)
LOFI_DEFINE_ERROR(ZeroSpectrum)
LOFI_DEFINE_ERROR(DegenerateFeatures)
LOFI_DEFINE_ERROR(IoError)

#undef LOFI_DEFINE_ERROR

/// Lanczos failed to reach the residual tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals)
      : Error("ConvergenceError", what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

/// Malformed LFMT data; `offset` is the byte position where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error("FormatError", what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace lofi
