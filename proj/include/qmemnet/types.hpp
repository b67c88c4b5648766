#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace qmemnet {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RowVec = Eigen::RowVectorXcd;
using RealVec = Eigen::VectorXd;

inline constexpr cplx I_unit{0.0, 1.0};

/// Failure categories surfaced by every module. The CLI maps these onto exit codes.
enum class ErrorKind {
    DimensionMismatch,
    NotHermitian,
    EigenFailure,
    BlockStructureViolation,
    SingularResolvent,
    NotHurwitz,
    WindowTooSmall,
    NormViolation,
    StepTooLarge,
    UnsupportedCoefficients,
    ScheduleInvalid,
    NonPositiveRate,
    EpsilonTooLarge,
    ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::EigenFailure: return "EigenFailure";
    case ErrorKind::BlockStructureViolation: return "BlockStructureViolation";
    case ErrorKind::SingularResolvent: return "SingularResolvent";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::WindowTooSmall: return "WindowTooSmall";
    case ErrorKind::NormViolation: return "NormViolation";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::UnsupportedCoefficients: return "UnsupportedCoefficients";
    case ErrorKind::ScheduleInvalid: return "ScheduleInvalid";
    case ErrorKind::NonPositiveRate: return "NonPositiveRate";
    case ErrorKind::EpsilonTooLarge: return "EpsilonTooLarge";
    case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline double max_abs(const Mat& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace qmemnet
