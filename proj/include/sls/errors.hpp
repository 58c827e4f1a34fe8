#pragma once

#include <stdexcept>
#include <string>

namespace sls {

// Error taxonomy shared by the library and the CLI exit-code mapping:
//   UsageError -> 2, IoError -> 3, FormatError -> 4, NumericError -> 5.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sls
