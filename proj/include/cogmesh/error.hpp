#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cogmesh {

// Each error carries a short machine-readable kind used as the CLI prefix.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error("domain-error", what) {}
};

class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& what) : Error("protocol-error", what) {}
};

class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error("capacity-error", what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error("numerical-error", what) {}
};

class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& what)
        : Error("undefined-metric", what) {}
};

class ReferentialError : public Error {
public:
    explicit ReferentialError(const std::string& what) : Error("referential-error", what) {}
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error("input-error", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io-error", what) {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("parse-error", "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Collects every violation found while validating a document.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error("validation-error", join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (const auto& s : v) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> violations_;
};

} // namespace cogmesh
