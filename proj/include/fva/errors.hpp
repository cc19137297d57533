#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fva {

enum class ErrorCode {
    InvalidRateOrder,
    InvalidHaircut,
    NonPositiveVol,
    InvalidInput,
    HaircutNotZero,
    PriceOutOfBounds,
    NoConvergence,
    GridTooCoarse,
    PsorDiverged,
    BadStrikes,
    OracleUnavailable,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidRateOrder: return "InvalidRateOrder";
    case ErrorCode::InvalidHaircut: return "InvalidHaircut";
    case ErrorCode::NonPositiveVol: return "NonPositiveVol";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::HaircutNotZero: return "HaircutNotZero";
    case ErrorCode::PriceOutOfBounds: return "PriceOutOfBounds";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::PsorDiverged: return "PsorDiverged";
    case ErrorCode::BadStrikes: return "BadStrikes";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class FvaError : public std::runtime_error {
public:
    FvaError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace fva
