#pragma once

namespace epi {

inline constexpr const char* kVersion = "0.1.0";

} // namespace epi
