#pragma once

#include <stdexcept>
#include <string>

namespace dlen {

// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on shapes, arguments or configuration was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A NaN or infinity showed up where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Malformed file content (image, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public Error {
 public:
  using Error::Error;
};

#define DLEN_REQUIRE(cond, msg)                 \
  do {                                          \
    if (!(cond)) throw ::dlen::ContractError(msg); \
  } while (0)

}  // namespace dlen
