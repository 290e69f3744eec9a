#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nullctl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error categories. The CLI maps these onto exit codes.
enum class ErrorKind {
    InvalidArgument,
    InvalidRegion,
    ConstructionInfeasible,
    Overflow,
    ShapeMismatch,
    Instability,
    CgStagnation,
    SweepDivergence,
    DegenerateSolution,
    CoupledSolveDivergence,
    UnresolvedIterate,
    NoConvergence,
    ConfigParse,
    Validation,
    MissingRun,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace nullctl
