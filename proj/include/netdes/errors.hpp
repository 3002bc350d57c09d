#pragma once

#include <stdexcept>
#include <string>

namespace netdes {

// Input text could not be read (bad metadata tag, unparseable field, ...).
// Carries a 1-based line number when one is known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, long line = -1)
        : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Input parsed fine but references something that does not exist
// (node id out of range, candidate edge missing, ...).
class StructureError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A value is out of its admissible domain (nonpositive capacity, negative
// demand, decision that would zero out a capacity, ...).
class ValidationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A demand cannot be routed on the given network.
class InfeasibleError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An operation was invoked on a problem variant that does not support it.
class UnsupportedVariantError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent run configuration.
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace netdes
