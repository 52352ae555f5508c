#pragma once

namespace tentlim {
inline constexpr const char* kVersion = "0.1.0";
}
