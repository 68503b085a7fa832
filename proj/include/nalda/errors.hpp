#pragma once

#include <stdexcept>
#include <string>

namespace nalda {

// Malformed content inside an input file. The message is a single line and
// names the offending file line where one exists.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read, or written at all.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace nalda
