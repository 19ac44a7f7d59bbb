#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlq {

// Invalid arguments, malformed configs, violated preconditions. CLI exit 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem or format failure. CLI exit 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Batch-file parse failure; offset() is the 1-based line (csv) or byte (raw).
class ParseError : public IoError {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : IoError(msg), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// No hardware projection exists under the given cell budget. CLI exit 3.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nlq
