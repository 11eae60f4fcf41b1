#pragma once

#include <stdexcept>

namespace chive {

// Bad user input: violated invariants, missing files, inconsistent data.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or wrong-version serialized documents.
struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};

// Dimension disagreement between graph pieces; a caller bug, not bad data.
struct ShapeError : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace chive
