#pragma once

#include <stdexcept>
#include <string>

namespace scoreforge {

enum class ErrorKind {
    parse,
    reference,
    geometry,
    range,
    io,
    precondition,
    generation,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::reference: return "reference";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::range: return "range";
    case ErrorKind::io: return "io";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::generation: return "generation";
    }
    return "unknown";
}

/// Base exception for every failure raised by the library. The kind lets
/// callers (and the CLI) react without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace scoreforge
