#pragma once

namespace kanmlp {

// Class 0 = Real (negative), class 1 = Generated (positive, the detection target).
inline constexpr int kReal = 0;
inline constexpr int kGenerated = 1;

}  // namespace kanmlp
