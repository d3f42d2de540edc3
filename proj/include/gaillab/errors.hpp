#pragma once

#include <stdexcept>
#include <string>

namespace gaillab {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

/// Linear solve produced a non-finite result; message carries a condition estimate.
struct SingularSystem : Error {
    SingularSystem(const std::string& what, double condition_estimate)
        : Error(what), condition_estimate(condition_estimate) {}
    double condition_estimate;
};

struct NoAnchors : Error {
    explicit NoAnchors(const std::string& what) : Error(what) {}
};

struct DegenerateSigma : Error {
    explicit DegenerateSigma(const std::string& what) : Error(what) {}
};

struct InvalidPerturbation : Error {
    explicit InvalidPerturbation(const std::string& what) : Error(what) {}
};

struct ZeroExpertDensity : Error {
    explicit ZeroExpertDensity(const std::string& what) : Error(what) {}
};

struct WrongRewardKind : Error {
    explicit WrongRewardKind(const std::string& what) : Error(what) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error(what) {}
};

/// Config parsing failed before validation (malformed JSON).
struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(what) {}
};

/// Config parsed but violates a constraint; `key` is the offending key path.
struct ValidationError : Error {
    ValidationError(const std::string& key, const std::string& what)
        : Error(key + ": " + what), key(key) {}
    std::string key;
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

struct MixedFixtures : Error {
    explicit MixedFixtures(const std::string& what) : Error(what) {}
};

}  // namespace gaillab
