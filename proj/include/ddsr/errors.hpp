#pragma once

#include <stdexcept>
#include <string>

namespace ddsr {

// Base for all toolkit failures. Subclasses map one-to-one onto the error
// kinds surfaced by the CLI.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class DimensionError : public Error { public: using Error::Error; };
class DegenerateError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class SolverError : public Error { public: using Error::Error; };

}  // namespace ddsr
