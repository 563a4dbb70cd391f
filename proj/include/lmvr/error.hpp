#ifndef LMVR_ERROR_HPP
#define LMVR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lmvr {

/// Malformed input data or model files. Maps to exit code 2 in the CLI.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation's precondition (e.g. unknown morph).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace lmvr

#endif  // LMVR_ERROR_HPP
