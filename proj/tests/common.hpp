#pragma once

#include "fva/market.hpp"

namespace fixtures {

// S = K = 100, T = 2, r = 10%, q = 0, vol = 50%.
inline constexpr double kSpot = 100.0;
inline constexpr double kStrike = 100.0;
inline constexpr double kExpiry = 2.0;
inline constexpr double kRate = 0.10;
inline constexpr double kVol = 0.5;

inline fva::FundingConfig classic() { return fva::FundingConfig::risk_free(kRate, 0.0, kVol); }

// 300 bp unsecured, 70 bp repo at 25% haircut, 50 bp stock borrow at 15%.
inline fva::FundingConfig funded() {
    auto c = classic();
    c.r_b = 0.13;
    c.repo_rate = 0.107;
    c.repo_haircut = 0.25;
    c.rebate_rate = 0.095;
    c.sec_haircut = 0.15;
    return c;
}

// Zero haircuts: repo r + 50 bp, rebate r - 50 bp, unsecured r + 300 bp.
inline fva::FundingConfig zero_haircut() {
    auto c = classic();
    c.r_b = kRate + 0.03;
    c.repo_rate = kRate + 0.005;
    c.rebate_rate = kRate - 0.005;
    return c;
}

}  // namespace fixtures
