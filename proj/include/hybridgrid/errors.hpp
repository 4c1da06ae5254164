#pragma once

#include <stdexcept>
#include <string>

namespace hybridgrid {

/// Structural validation failure. `kind()` identifies the violated rule and
/// `element()` the offending bus/line/converter id.
class ValidationError : public std::runtime_error {
public:
    enum class Kind {
        DisconnectedSubsystem,
        MixedDomainLine,
        MixedDomainSubsystem,
        DanglingConverter,
        NonzeroCostAtConverterBus,
        DisconnectedCommGraph,
        BadField,
    };

    ValidationError(Kind kind, std::string element, const std::string& message)
        : std::runtime_error(name(kind) + "(" + element + "): " + message),
          kind_(kind),
          element_(std::move(element)) {}

    Kind kind() const { return kind_; }
    const std::string& element() const { return element_; }

    static std::string name(Kind k) {
        switch (k) {
            case Kind::DisconnectedSubsystem: return "DisconnectedSubsystem";
            case Kind::MixedDomainLine: return "MixedDomainLine";
            case Kind::MixedDomainSubsystem: return "MixedDomainSubsystem";
            case Kind::DanglingConverter: return "DanglingConverter";
            case Kind::NonzeroCostAtConverterBus: return "NonzeroCostAtConverterBus";
            case Kind::DisconnectedCommGraph: return "DisconnectedCommGraph";
            case Kind::BadField: return "BadField";
        }
        return "ValidationError";
    }

private:
    Kind kind_;
    std::string element_;
};

class UnknownSubsystem : public std::runtime_error {
public:
    explicit UnknownSubsystem(const std::string& id)
        : std::runtime_error("UnknownSubsystem: " + id) {}
};

class ModeMismatch : public std::runtime_error {
public:
    explicit ModeMismatch(const std::string& what_arg)
        : std::runtime_error("ModeMismatch: " + what_arg) {}
};

class DimensionMismatch : public std::runtime_error {
public:
    explicit DimensionMismatch(const std::string& what_arg)
        : std::runtime_error("DimensionMismatch: " + what_arg) {}
};

class NegativeDelay : public std::runtime_error {
public:
    NegativeDelay() : std::runtime_error("NegativeDelay: delay must be >= 0") {}
};

/// Trajectory divergence: some state entry left [-1e6, 1e6] or became NaN.
class NonFiniteState : public std::runtime_error {
public:
    explicit NonFiniteState(double t)
        : std::runtime_error("NonFiniteState at t=" + std::to_string(t)),
          time_(t) {}

    double time() const { return time_; }

private:
    double time_;
};

class SingularJacobian : public std::runtime_error {
public:
    explicit SingularJacobian(const std::string& what_arg)
        : std::runtime_error("SingularJacobian: " + what_arg) {}
};

class AllCostsInfinite : public std::runtime_error {
public:
    AllCostsInfinite()
        : std::runtime_error("AllCostsInfinite: no source has a positive droop gain") {}
};

}  // namespace hybridgrid
