#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "lofi/kernel.hpp"
#include "lofi/lofi.hpp"

namespace lofi {

/// Model container: a plain-text manifest followed by LFMT blocks.
///
///   LOFI-MODEL 1
///   type neural|kernel
///   <key> <values...>          scalars; doubles in hex-float form
///   block <name> <offset> <rows> <cols>
///   end
///   <LFMT blocks>
///
/// Block offsets count from the first byte after the "end" line. Doubles
/// round-trip bit for bit, so a reloaded model predicts identically.
using AnyModel = std::variant<LofiModel, KernelModel>;

std::string encode_model(const LofiModel& model);
std::string encode_model(const KernelModel& model);
AnyModel decode_model(const std::string& bytes);

void save_model(const LofiModel& model, const std::filesystem::path& path);
void save_model(const KernelModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

Vector predict(const AnyModel& model, const Matrix& x);

}  // namespace lofi
