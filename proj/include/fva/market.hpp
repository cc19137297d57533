#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fva/errors.hpp"

namespace fva {

/// Flat rates, dividend yield, volatility and stock financing terms.
///
/// Financing a long stock hedge goes through repo (repo_rate, repo_haircut);
/// financing a short stock hedge goes through securities lending, where the
/// posted cash margin earns rebate_rate and sec_haircut is the extra margin.
/// With no_repo set the hedge is financed entirely unsecured.
struct FundingConfig {
    double r = 0.0;
    double r_b = 0.0;
    double q = 0.0;
    double sigma = 0.0;
    double repo_rate = 0.0;
    double repo_haircut = 0.0;
    double rebate_rate = 0.0;
    double sec_haircut = 0.0;
    bool no_repo = false;

    /// Classic Black-Scholes economy: everything borrows and lends at r.
    [[nodiscard]] static FundingConfig risk_free(double r, double q, double sigma) {
        FundingConfig c;
        c.r = r;
        c.r_b = r;
        c.q = q;
        c.sigma = sigma;
        c.repo_rate = r;
        c.rebate_rate = r;
        return c;
    }

    [[nodiscard]] FundingConfig degenerate() const { return risk_free(r, q, sigma); }

    [[nodiscard]] bool is_degenerate() const noexcept {
        return r_b == r && (no_repo || (repo_rate == r && rebate_rate == r));
    }

    [[nodiscard]] bool operator==(const FundingConfig&) const = default;
};

/// First violated constraint, or nullopt when the config is usable.
[[nodiscard]] inline std::optional<FvaError> validate(const FundingConfig& c) {
    const double values[] = {c.r, c.r_b, c.q, c.sigma, c.repo_rate, c.repo_haircut, c.rebate_rate, c.sec_haircut};
    for (double v : values) {
        if (!std::isfinite(v)) return FvaError(ErrorCode::InvalidInput, "non-finite funding parameter");
    }
    if (c.r_b < c.r) return FvaError(ErrorCode::InvalidRateOrder, "borrowing rate r_b must be >= deposit rate r");
    if (c.repo_rate < c.r) return FvaError(ErrorCode::InvalidRateOrder, "repo rate must be >= deposit rate r");
    if (c.rebate_rate > c.r) return FvaError(ErrorCode::InvalidRateOrder, "rebate rate must be <= deposit rate r");
    if (c.repo_haircut < 0.0 || c.repo_haircut >= 1.0)
        return FvaError(ErrorCode::InvalidHaircut, "repo haircut must lie in [0, 1)");
    if (c.sec_haircut < 0.0 || c.sec_haircut >= 1.0)
        return FvaError(ErrorCode::InvalidHaircut, "sec lending haircut must lie in [0, 1)");
    if (!(c.sigma > 0.0)) return FvaError(ErrorCode::NonPositiveVol, "volatility must be positive");
    return std::nullopt;
}

inline void require_valid(const FundingConfig& c) {
    if (auto err = validate(c)) throw *err;
}

enum class OptionKind { Call, Put };
enum class ExerciseStyle { European, American };

/// Which way the market maker faces the book. Bid values it held long,
/// Ask values it held short, RiskFree is the classic reference price V*.
enum class Side { Bid, Ask, RiskFree };

[[nodiscard]] constexpr double side_sign(Side side) noexcept { return side == Side::Ask ? -1.0 : 1.0; }

struct OptionLeg {
    OptionKind kind = OptionKind::Call;
    double strike = 0.0;
    double quantity = 1.0;  // positive: market maker is long the leg
    ExerciseStyle style = ExerciseStyle::European;

    [[nodiscard]] bool operator==(const OptionLeg&) const = default;
};

[[nodiscard]] inline double intrinsic(OptionKind kind, double strike, double s) noexcept {
    return kind == OptionKind::Call ? std::max(s - strike, 0.0) : std::max(strike - s, 0.0);
}

/// A book of vanilla legs sharing one expiry and one exercise style.
class Portfolio {
public:
    Portfolio(std::vector<OptionLeg> legs, double expiry) : legs_(std::move(legs)), expiry_(expiry) {
        if (legs_.empty()) throw FvaError(ErrorCode::InvalidInput, "portfolio needs at least one leg");
        if (!(expiry_ > 0.0) || !std::isfinite(expiry_))
            throw FvaError(ErrorCode::InvalidInput, "expiry must be positive");
        for (const auto& leg : legs_) {
            if (!(leg.strike > 0.0) || !std::isfinite(leg.strike))
                throw FvaError(ErrorCode::InvalidInput, "strike must be positive");
            if (leg.quantity == 0.0 || !std::isfinite(leg.quantity))
                throw FvaError(ErrorCode::InvalidInput, "leg quantity must be nonzero");
            if (leg.style != legs_.front().style)
                throw FvaError(ErrorCode::InvalidInput, "mixed exercise styles in one portfolio");
        }
    }

    [[nodiscard]] static Portfolio single(OptionKind kind, double strike, double expiry, double quantity = 1.0,
                                          ExerciseStyle style = ExerciseStyle::European) {
        return Portfolio({OptionLeg{kind, strike, quantity, style}}, expiry);
    }

    [[nodiscard]] std::span<const OptionLeg> legs() const noexcept { return legs_; }
    [[nodiscard]] double expiry() const noexcept { return expiry_; }
    [[nodiscard]] ExerciseStyle style() const noexcept { return legs_.front().style; }

    [[nodiscard]] double max_strike() const noexcept {
        double k = 0.0;
        for (const auto& leg : legs_) k = std::max(k, leg.strike);
        return k;
    }

    [[nodiscard]] Portfolio scaled(double factor) const {
        auto legs = legs_;
        for (auto& leg : legs) leg.quantity *= factor;
        return Portfolio(std::move(legs), expiry_);
    }

    [[nodiscard]] Portfolio with_expiry(double expiry) const { return Portfolio(legs_, expiry); }

    [[nodiscard]] bool operator==(const Portfolio&) const = default;

private:
    std::vector<OptionLeg> legs_;
    double expiry_;
};

[[nodiscard]] inline double terminal_payoff(const Portfolio& portfolio, double s) {
    if (s < 0.0) throw FvaError(ErrorCode::InvalidInput, "stock price must be nonnegative");
    double total = 0.0;
    for (const auto& leg : portfolio.legs()) total += leg.quantity * intrinsic(leg.kind, leg.strike, s);
    return total;
}

}  // namespace fva
