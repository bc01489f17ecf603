#pragma once

namespace diffdepth {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace diffdepth
