#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aglrls {

/// Operand shapes do not line up.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A dataset specification violates its invariants.
class SpecError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A call made in the wrong lifecycle state (e.g. inference on an unfrozen state).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed input file. `line()` is 1-based, 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace aglrls
