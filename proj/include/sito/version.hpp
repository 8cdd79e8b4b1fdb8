#pragma once

namespace sito {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sito
