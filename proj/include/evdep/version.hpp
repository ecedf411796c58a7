#pragma once

namespace evdep {

inline constexpr const char* kToolName = "evdep";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace evdep
