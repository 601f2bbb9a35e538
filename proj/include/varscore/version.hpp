#pragma once

namespace varscore {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace varscore
