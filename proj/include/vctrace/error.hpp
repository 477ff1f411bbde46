#pragma once

#include <stdexcept>
#include <string>

namespace vctrace {

// Base of every error the library throws. The CLI maps `Error` to exit code 2
// and `InvariantError` to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

/// Malformed record in an input table or corpus.
class FormatError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "format"; }
};

class CatalogMissError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "catalog_miss"; }
};

class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

class CycleError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "cycle"; }
};

class LookupError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "lookup"; }
};

/// Failure inside one pipeline stage; `stage()` names it ("report", "construct", ...).
class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const char* kind() const noexcept override { return "pipeline"; }
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Transport or protocol failure of a verifier backend. Distinct from an
/// `unknown` verdict, which is a normal outcome.
class VerifierError : public Error {
public:
    VerifierError(std::string node_id, const std::string& what)
        : Error(node_id.empty() ? what : node_id + ": " + what), node_id_(std::move(node_id)) {}
    const char* kind() const noexcept override { return "verifier"; }
    const std::string& node_id() const noexcept { return node_id_; }

private:
    std::string node_id_;
};

/// An internal invariant was breached (a bug, not bad input).
class InvariantError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invariant"; }
};

}  // namespace vctrace
