#pragma once

namespace nlq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nlq
