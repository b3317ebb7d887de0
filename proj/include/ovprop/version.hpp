#pragma once

namespace ovprop {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ovprop
