#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cdsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by validation; carries every violated constraint, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Two atoms at the same point: the dipole kernel is singular there.
class CoincidentAtoms : public Error {
public:
    using Error::Error;
};

class IntegrationError : public Error {
public:
    using Error::Error;
};

class LinearAlgebraError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cdsim
