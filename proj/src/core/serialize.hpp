#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace stochflow {

// Versioned little-endian binary model format, magic "IFLOW1". Byte layout is
// documented in docs/model_format.md.
std::vector<std::uint8_t> serialize_model(const ImitationModel& m);
ImitationModel deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const ImitationModel& m, const std::string& path);
ImitationModel load_model(const std::string& path);

}  // namespace stochflow
