#pragma once

#include <stdexcept>
#include <string>

namespace xmamba {

// Error taxonomy shared by all modules. Every precondition failure maps to
// exactly one of these so callers (and tests) can tell geometry problems
// apart from bad parameters or malformed data.

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

struct GeometryError : std::runtime_error {
    explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

struct ParameterError : std::runtime_error {
    explicit ParameterError(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace xmamba
