#pragma once

#include <stdexcept>
#include <string>

namespace cande {

/// All failures surface as an Error carrying a short machine-parsable code
/// (stable, screaming-snake) plus a human message. The CLI prints them as
/// `error[CODE]: message` and exits nonzero.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& message) : Error("E_SHAPE", message) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& message) : Error("E_NUMERIC", message) {}
};

struct DataError : Error {
    explicit DataError(const std::string& message) : Error("E_DATA", message) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& message) : Error("E_FORMAT", message) {}
};

struct CheckpointError : Error {
    explicit CheckpointError(const std::string& message) : Error("E_CHECKPOINT", message) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& message) : Error("E_CONFIG", message) {}
};

}  // namespace cande
