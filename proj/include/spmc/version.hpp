#pragma once

namespace spmc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spmc
