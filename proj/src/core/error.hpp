// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hsplat {

// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    kRuntime      = 1,
    kUsage        = 2,
    kParse        = 3,
    kInvalidInput = 4,
    kNumerical    = 5,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(message), mKind(kind) {}

    ErrorKind
    kind() const noexcept {
        return mKind;
    }

  private:
    ErrorKind mKind;
};

[[noreturn]] inline void
throwInvalid(const std::string &message) {
    throw Error(ErrorKind::kInvalidInput, message);
}

[[noreturn]] inline void
throwParse(const std::string &message) {
    throw Error(ErrorKind::kParse, message);
}

[[noreturn]] inline void
throwNumerical(const std::string &message) {
    throw Error(ErrorKind::kNumerical, message);
}

[[noreturn]] inline void
throwRuntime(const std::string &message) {
    throw Error(ErrorKind::kRuntime, message);
}

#define HS_CHECK_INPUT(cond, msg)          \
    do {                                   \
        if (!(cond))                       \
            ::hsplat::throwInvalid((msg)); \
    } while (0)

} // namespace hsplat
