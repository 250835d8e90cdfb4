#pragma once

namespace bpre {

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace bpre
