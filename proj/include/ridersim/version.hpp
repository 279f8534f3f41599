#pragma once

namespace ridersim {

inline constexpr const char* kEngineVersion = "1.0.0";

}  // namespace ridersim
