#pragma once

#include <stdexcept>
#include <string>

namespace kgbias {

// Error taxonomy mirrored by the CLI exit codes:
//   ParseError / LookupError -> 2 (bad data or bad file)
//   NumericError             -> 3 (non-finite values during training)
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace kgbias
