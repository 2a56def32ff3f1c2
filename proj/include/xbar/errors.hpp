#pragma once

#include <stdexcept>
#include <string>

namespace xbar {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid network/weight manifests or a configuration the mapper cannot
// satisfy (e.g. fan-in exceeding the axon capacity).
class SpecError : public Error {
public:
    using Error::Error;
};

// Filesystem and artifact-format failures.
class IoError : public Error {
public:
    using Error::Error;
};

// A mapped network disagreed with the dense reference beyond tolerance.
class VerifyError : public Error {
public:
    using Error::Error;
};

}  // namespace xbar
