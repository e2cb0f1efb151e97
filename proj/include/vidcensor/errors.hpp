#pragma once

#include <stdexcept>
#include <string>

namespace vidcensor {

/// Error caused by malformed or inconsistent external input (files, streams,
/// manifests, child-process output). The CLI maps these to exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vidcensor
