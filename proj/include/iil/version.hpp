#pragma once

namespace iil {
inline constexpr const char* kToolName = "iilbench";
inline constexpr const char* kVersion = "0.1.0";
}  // namespace iil
