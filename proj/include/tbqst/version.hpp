#pragma once

namespace tbqst {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tbqst
