#pragma once

namespace motionact {

// Build tag embedded in every artifact. Bump alongside format changes.
inline constexpr const char* kBuildTag = "motionact-0.1.0";

}  // namespace motionact
