#pragma once

#include <stdexcept>
#include <string>

namespace pmean {

/// Malformed configuration, schema violation, or bad argument combination.
/// CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A requested construction would exceed a configured size cap.
/// Carries the offending counts in the message. CLI maps this to exit code 3.
class SizeCapError : public std::runtime_error {
public:
    explicit SizeCapError(const std::string& what) : std::runtime_error(what) {}
};

/// A runtime evaluation failure, e.g. a policy undefined at a reached
/// (state, step) pair.
class EvaluationError : public std::runtime_error {
public:
    explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace pmean
