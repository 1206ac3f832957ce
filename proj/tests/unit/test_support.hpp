// Copyright Contributors to the headsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Small helpers shared by the unit tests.

#pragma once

#include "error.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

namespace hsplat::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        mPath = std::filesystem::temp_directory_path() /
                ("headsplat_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(mPath);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(mPath, ec);
    }
    TempDir(const TempDir &)            = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &
    path() const {
        return mPath;
    }
    std::filesystem::path
    operator/(const std::string &name) const {
        return mPath / name;
    }

  private:
    std::filesystem::path mPath;
};

/// Runs `fn` and returns the kind of the hsplat::Error it throws.
template <class Fn>
::testing::AssertionResult
throwsKind(Fn &&fn, ErrorKind kind, const std::string &needle = {}) {
    try {
        fn();
    } catch (const Error &e) {
        if (e.kind() != kind)
            return ::testing::AssertionFailure()
                   << "wrong kind " << static_cast<int>(e.kind()) << ": " << e.what();
        if (!needle.empty() && std::string(e.what()).find(needle) == std::string::npos)
            return ::testing::AssertionFailure() << "message lacks '" << needle << "': " << e.what();
        return ::testing::AssertionSuccess();
    }
    return ::testing::AssertionFailure() << "no error thrown";
}

} // namespace hsplat::testing
