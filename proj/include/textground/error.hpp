#pragma once

#include <stdexcept>
#include <string>

namespace textground {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value or file violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised by trace providers; carries the decoding step that failed when known.
class AdapterError : public Error {
 public:
  using Error::Error;
};

}  // namespace textground
