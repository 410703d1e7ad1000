#pragma once

namespace ncq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ncq
