#pragma once

namespace rprm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rprm
