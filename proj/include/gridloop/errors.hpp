#pragma once

#include <stdexcept>
#include <string>

namespace gridloop {

/// Malformed input file (case or scenario).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally valid input that violates a model invariant. The message
/// names the offending element (bus id, line, key path).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class DimensionError : public std::logic_error {
public:
    explicit DimensionError(const std::string& what) : std::logic_error(what) {}
};

/// Power-flow iteration failed to converge, or a voltage fell below the
/// collapse floor. Signals infeasible or extreme injections.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual(residual), iterations(iterations) {}
    double residual;
    int iterations;
};

/// H'WH singular or indefinite: the measurement allocation does not
/// determine the state uniquely.
class UnobservableError : public std::runtime_error {
public:
    explicit UnobservableError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gridloop
