#pragma once

#include <stdexcept>
#include <string>

namespace sito {

/// Thrown when an evolving state exceeds the blow-up guard
/// (norm > 1e3 * initial norm).
class BlowupError : public std::runtime_error {
 public:
  BlowupError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace sito
