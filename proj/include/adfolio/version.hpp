#pragma once

namespace adfolio {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace adfolio
