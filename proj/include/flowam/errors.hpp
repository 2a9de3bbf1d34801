#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace flowam {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (e.g. t outside [0,1]).
class DomainError : public Error {
  public:
    using Error::Error;
};

// A denominator (alpha_t, beta_t, eta_t, sigma_t) vanished where it must not.
class SingularityError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

// NaN/Inf encountered in a state, adjoint, loss, gradient or parameter.
class NonFiniteError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class TapeError : public Error {
  public:
    using Error::Error;
};

class TooFewSamples : public Error {
  public:
    using Error::Error;
};

class EmptyInput : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(std::string file, int line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}
    int line() const { return line_; }
    const std::string& file() const { return file_; }

  private:
    std::string file_;
    int line_;
};

// Carries every violated constraint, not just the first.
class ValidationError : public Error {
  public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const { return violations_; }

  private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "invalid configuration:";
        for (const auto& s : v) out += "\n  - " + s;
        return out;
    }
    std::vector<std::string> violations_;
};

}  // namespace flowam
