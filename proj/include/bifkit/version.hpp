#pragma once

namespace bifkit {

inline constexpr const char* version_string = "0.1.0";

// Config and report schema tag. Bump the suffix when the on-disk layout
// changes incompatibly.
inline constexpr const char* schema_tag = "bifurcate-kit/1";

} // namespace bifkit
