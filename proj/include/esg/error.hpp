#pragma once

#include <stdexcept>
#include <string>

namespace esg {

// Error categories map to CLI exit codes: validation/usage/shape -> 1,
// io/format -> 2.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : error {
    using error::error;
};

struct validation_error : error {
    using error::error;
};

struct usage_error : error {
    using error::error;
};

struct numeric_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

struct format_error : error {
    using error::error;
};

}  // namespace esg
