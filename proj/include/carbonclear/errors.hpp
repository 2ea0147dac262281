#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace carbonclear {

// Malformed caller input: bad files, invalid networks, mismatched vectors.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Parse failure in an external file; message carries file/row/column.
class ParseError : public InputError {
 public:
  explicit ParseError(const std::string& what) : InputError(what) {}
};

// A clearing problem admits no feasible dispatch. `families` names the
// constraint groups implicated by the phase-1 certificate (balance, line,
// allocation, ...).
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, std::vector<std::string> families)
      : std::runtime_error(what), families_(std::move(families)) {}
  const std::vector<std::string>& families() const { return families_; }

 private:
  std::vector<std::string> families_;
};

// Solver gave up before reaching a verdict (iteration cap).
class IterationLimitError : public std::runtime_error {
 public:
  explicit IterationLimitError(const std::string& what)
      : std::runtime_error(what) {}
};

// A condition the library guarantees can not occur did occur.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace carbonclear
