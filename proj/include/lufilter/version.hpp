#pragma once

namespace luf {

inline constexpr const char* kVersion = "0.1.0";

}
