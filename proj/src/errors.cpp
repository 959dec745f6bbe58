#include "cpaem/errors.hpp"

namespace cpaem {

ExitCode exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ResourceError*>(&e) != nullptr) return ExitCode::Resource;
    if (dynamic_cast<const NumericalError*>(&e) != nullptr) return ExitCode::Numerical;
    if (dynamic_cast<const ContractViolation*>(&e) != nullptr) return ExitCode::Numerical;
    return ExitCode::Usage;
}

}  // namespace cpaem
