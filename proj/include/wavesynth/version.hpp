#pragma once

#include <string_view>

namespace wavesynth {

inline constexpr std::string_view kVersion = "wavesynth 0.1.0";

}  // namespace wavesynth
