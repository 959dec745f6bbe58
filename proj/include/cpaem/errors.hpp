#pragma once

#include <stdexcept>
#include <string>

namespace cpaem {

// Exit-code mapping used by the command line tool: input errors are usage
// errors (1), numerical failures (2), resource limits (3).
enum class ExitCode : int { Ok = 0, Usage = 1, Numerical = 2, Resource = 3 };

class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class ResourceError : public std::runtime_error {
public:
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a cached E-step is used after the parameters it was computed
/// from have changed.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

ExitCode exit_code_for(const std::exception& e) noexcept;

}  // namespace cpaem
