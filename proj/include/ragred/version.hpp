#pragma once

namespace ragred {

inline constexpr const char* kVersion = "0.1.0";

// Format version for on-disk artifacts (snapshots, stage outputs, reports).
inline constexpr int kArtifactFormatVersion = 1;

}  // namespace ragred
