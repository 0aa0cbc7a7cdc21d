#pragma once

#include <stdexcept>
#include <string>

namespace wssp {

enum class ErrorCategory { config, capacity, solver, io, infeasible, missing_oracle };

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return "config";
        case ErrorCategory::capacity: return "capacity";
        case ErrorCategory::solver: return "solver";
        case ErrorCategory::io: return "io";
        case ErrorCategory::infeasible: return "infeasible";
        case ErrorCategory::missing_oracle: return "missing-oracle";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory cat, const std::string& what)
        : std::runtime_error(std::string(to_string(cat)) + ": " + what), category_(cat) {}

    ErrorCategory category() const { return category_; }

    // Process exit codes used by the CLI, one per category.
    int exit_code() const {
        switch (category_) {
            case ErrorCategory::config: return 2;
            case ErrorCategory::capacity: return 3;
            case ErrorCategory::solver: return 4;
            case ErrorCategory::io: return 5;
            case ErrorCategory::infeasible: return 6;
            case ErrorCategory::missing_oracle: return 7;
        }
        return 1;
    }

private:
    ErrorCategory category_;
};

}  // namespace wssp
