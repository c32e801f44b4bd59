#pragma once

#include <filesystem>
#include <string>

#include "sasow/classifiers.hpp"

namespace sasow {

// A checkpoint is `<stem>.json` (kind, dims, seed, class names) next to
// `<stem>.bin`: "SASP", u32 version, then every parameter as a
// little-endian f64 in declaration order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& dir, const std::string& stem);
ClassifierModel load_checkpoint(const std::filesystem::path& dir, const std::string& stem);

// Raw parameter blob, also used for checksums of trained models.
std::string encode_parameters(const ClassifierModel& model);

}  // namespace sasow
