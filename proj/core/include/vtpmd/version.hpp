#pragma once

namespace vtpmd {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace vtpmd
