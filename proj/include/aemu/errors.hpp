#pragma once

#include <stdexcept>
#include <string>

namespace aemu {

// Error taxonomy mirrored by the CLI exit codes:
//   UsageError/ConfigError -> 1, DataError/SchemaError -> 2, NumericError -> 3.

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : UsageError {
    using UsageError::UsageError;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : DataError {
    using DataError::DataError;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace aemu
