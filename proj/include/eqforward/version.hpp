#pragma once

namespace eqf {

inline constexpr const char* kToolName = "eqforward";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace eqf
