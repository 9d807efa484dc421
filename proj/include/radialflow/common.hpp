#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace radialflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Final verdict of any solver run. `Infeasible` is only reported on a hard
/// certificate (domain violation, nonpositive voltage bound, stalled
/// non-fixed-point, certified positive phase-one optimum); budget exhaustion
/// maps to `Inconclusive`.
enum class SolveStatus { Solved, Infeasible, Inconclusive };

constexpr const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Solved: return "solved";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

enum class SolveMethod { FixedPoint, Relaxation, Energy };

constexpr const char* to_string(SolveMethod m) {
    switch (m) {
        case SolveMethod::FixedPoint: return "fixed_point";
        case SolveMethod::Relaxation: return "relaxation";
        case SolveMethod::Energy: return "energy";
    }
    return "unknown";
}

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (bad JSON/CSV, missing fields, bad numbers).
class ParseError : public Error {
  public:
    using Error::Error;
};

/// Structurally invalid network (not a rooted tree, bad slack, nonuniform
/// R/X ratio, nonpositive susceptance, ...).
class ValidationError : public Error {
  public:
    enum class Cause {
        Cycle,
        Disconnected,
        MultipleParents,
        WrongOrientation,
        DuplicateLine,
        SelfLoop,
        BadSlack,
        NonpositiveSusceptance,
        NonuniformKappa,
        UnsupportedField,
        BadInput,
    };

    ValidationError(Cause cause, const std::string& what) : Error(what), cause_(cause) {}
    Cause cause() const { return cause_; }

  private:
    Cause cause_;
};

/// A point left the operator domain: v_i*v_k - s_ik^2 < 0 on the listed lines.
class DomainViolationError : public Error {
  public:
    DomainViolationError(std::vector<int> lines, const std::string& what)
        : Error(what), lines_(std::move(lines)) {}
    const std::vector<int>& lines() const { return lines_; }

  private:
    std::vector<int> lines_;
};

/// The voltage upper bound 1 + 2*L̃⁻¹q̃ has a nonpositive component, which
/// certifies infeasibility of the instance.
class VmaxNonpositiveError : public Error {
  public:
    VmaxNonpositiveError(Vector vmax, const std::string& what)
        : Error(what), vmax_(std::move(vmax)) {}
    const Vector& vmax() const { return vmax_; }

  private:
    Vector vmax_;
};

class SingularMatrixError : public Error {
  public:
    using Error::Error;
};

/// Exhaustive enumeration is only supported for up to 4 non-slack buses.
class DimensionTooLargeError : public Error {
  public:
    using Error::Error;
};

/// Two solutions being compared do not come from the same instance.
class InstanceMismatchError : public Error {
  public:
    using Error::Error;
};

/// A candidate point failed the residual acceptance gate.
class ResidualTooLargeError : public Error {
  public:
    using Error::Error;
};

/// An operation that requires a positive-definite reduced Jacobian was called
/// with an indefinite one.
class NotPDError : public Error {
  public:
    using Error::Error;
};

/// Diagnostics level, parsed once from the RADIALFLOW_LOG environment
/// variable (error|warn|info|debug; default warn). Messages go to stderr.
enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log_message(LogLevel::Error, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }

}  // namespace radialflow
