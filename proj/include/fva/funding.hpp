#pragma once

#include <algorithm>

#include "fva/market.hpp"

namespace fva {

/// Haircut and financing rate that apply to a given stock holding, plus the
/// nominal stock rate r_s = r + (1 - h)(r_p - r) they induce.
struct FinancingSelection {
    double h_signed = 0.0;
    double r_p = 0.0;
    double r_s = 0.0;
};

/// Long stock is repo financed (h = +repo_haircut), short stock goes through
/// sec lending (h = -sec_haircut). A zero holding takes the repo branch;
/// every term it feeds is multiplied by the holding anyway.
[[nodiscard]] inline FinancingSelection select_financing(int holding_sign, const FundingConfig& c) noexcept {
    FinancingSelection sel;
    if (c.no_repo) {
        sel.h_signed = holding_sign < 0 ? -1.0 : 1.0;
        sel.r_p = c.r;
    } else if (holding_sign < 0) {
        sel.h_signed = -c.sec_haircut;
        sel.r_p = c.rebate_rate;
    } else {
        sel.h_signed = c.repo_haircut;
        sel.r_p = c.repo_rate;
    }
    sel.r_s = c.r + (1.0 - sel.h_signed) * (sel.r_p - c.r);
    return sel;
}

[[nodiscard]] constexpr int sign_of(double x) noexcept { return (x > 0.0) - (x < 0.0); }

/// Stock holding of the economy that replicates a position worth `value`
/// with sensitivity `slope`: it hedges the liability -value, so holds -slope.
[[nodiscard]] constexpr double hedge_holding(double slope) noexcept { return -slope; }

/// Unsecured funding need of a position: the amount the economy must borrow
/// at r_b, before the (.)^+ cut. Positive means N > 0.
[[nodiscard]] inline double unsecured_need(double value, double slope, double s, const FundingConfig& c) noexcept {
    const auto sel = select_financing(sign_of(hedge_holding(slope)), c);
    return value - sel.h_signed * s * slope;
}

/// Funding cost rate (r_b - r)(U - h S U_S)^+ charged on a position of
/// signed value U. For U = V this is the long-option term; for U = -V it is
/// the short-option term (h S V_S - V)^+.
[[nodiscard]] inline double funding_term(double value, double slope, double s, const FundingConfig& c) noexcept {
    return (c.r_b - c.r) * std::max(unsecured_need(value, slope, s, c), 0.0);
}

/// Cash accounts of the self-financing economy at zero wealth.
struct FundingAccounts {
    double deposit = 0.0;    // M >= 0, earns r
    double unsecured = 0.0;  // N >= 0, pays r_b
    double repo = 0.0;       // R, signed
    double holding = 0.0;    // shares held
    double h_signed = 0.0;
};

[[nodiscard]] inline FundingAccounts funding_accounts(double value, double slope, double s,
                                                      const FundingConfig& c) noexcept {
    FundingAccounts acc;
    acc.holding = hedge_holding(slope);
    const auto sel = select_financing(sign_of(acc.holding), c);
    acc.h_signed = sel.h_signed;
    acc.repo = (1.0 - sel.h_signed) * acc.holding * s;
    // M - N = L - h * holding * S, with liability L = -value.
    const double net = -value - sel.h_signed * acc.holding * s;
    acc.deposit = std::max(net, 0.0);
    acc.unsecured = std::max(-net, 0.0);
    return acc;
}

/// f_b = V* - V_b for a bid, f_a = V_a - V* for an ask. Both are quotes.
[[nodiscard]] inline double fva(Side side, double adjusted_price, double risk_free_price) {
    switch (side) {
    case Side::Bid: return risk_free_price - adjusted_price;
    case Side::Ask: return adjusted_price - risk_free_price;
    case Side::RiskFree: return 0.0;
    }
    return 0.0;
}

}  // namespace fva
