#pragma once

namespace ncham {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ncham
