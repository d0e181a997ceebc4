#pragma once

namespace babf {

#ifdef BABF_VERSION_STRING
inline constexpr const char* kVersion = BABF_VERSION_STRING;
#else
inline constexpr const char* kVersion = "0.1.0";
#endif

}  // namespace babf
