// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hflow {

/// Base class for every error raised by the library. `code()` is a stable
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

class UnknownPreset : public Error {
public:
    explicit UnknownPreset(const std::string& message) : Error("unknown_preset", message) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("bad_format", message) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& message) : Error("domain", message) {}
};

class FixedDivideByZero : public Error {
public:
    FixedDivideByZero() : Error("fixed_divide_by_zero", "fixed divide by zero") {}
};

class SizeMismatch : public Error {
public:
    explicit SizeMismatch(const std::string& message) : Error("size_mismatch", message) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error("bad_data", message) {}
};

class PipelineDeadlock : public Error {
public:
    explicit PipelineDeadlock(const std::string& stage)
        : Error("pipeline_deadlock", "pipeline deadlock: stage '" + stage + "' stalled beyond watchdog"),
          stage_(stage) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

class DegenerateReference : public Error {
public:
    DegenerateReference() : Error("degenerate_reference", "degenerate reference: sum of |reference| is zero") {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace hflow
