#pragma once

#include <stdexcept>
#include <string>

namespace dc2 {

// Process exit codes: 0 success, 1 usage/config, 2 backend, 3 dataset.
enum class ErrorKind { usage = 1, backend = 2, dataset = 3, internal = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
        case ErrorKind::usage: return 1;
        case ErrorKind::backend: return 2;
        case ErrorKind::dataset: return 3;
        default: return 1;
        }
    }

private:
    ErrorKind kind_;
};

} // namespace dc2
