#pragma once

namespace pointkan {

inline constexpr const char* kVersionString = "0.1.0";

}  // namespace pointkan
