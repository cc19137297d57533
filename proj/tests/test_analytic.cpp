#include <cmath>

#include <gtest/gtest.h>

#include "common.hpp"
#include "fva/analytic.hpp"

using namespace fva;
using fixtures::kExpiry;
using fixtures::kRate;
using fixtures::kSpot;
using fixtures::kStrike;
using fixtures::kVol;

// Golden values below were computed with 40-digit arbitrary precision.

TEST(BlackScholes, CallMatchesReference) {
    const auto c = bs_price(OptionKind::Call, kSpot, kStrike, kExpiry, kRate, 0.0, kVol);
    EXPECT_NEAR(c.price, 35.14522192715943, 1e-11);
    EXPECT_NEAR(c.delta, 0.7377408598934618, 1e-13);
    EXPECT_NEAR(c.gamma, 0.004607660065061101, 1e-15);
    EXPECT_NEAR(c.price, 35.1452, 5e-5);
}

TEST(BlackScholes, PutMatchesReference) {
    const auto p = bs_price(OptionKind::Put, kSpot, kStrike, kExpiry, kRate, 0.0, kVol);
    EXPECT_NEAR(p.price, 17.01829723495761, 1e-11);
    EXPECT_NEAR(p.delta, -0.2622591401065382, 1e-13);
    EXPECT_NEAR(p.gamma, 0.004607660065061101, 1e-15);
    EXPECT_NEAR(p.price, 17.0183, 5e-5);
}

TEST(BlackScholes, PutCallParity) {
    for (double s : {40.0, 80.0, 100.0, 130.0, 250.0}) {
        for (double q : {0.0, 0.03}) {
            for (double t : {0.1, 1.0, 5.0}) {
                const double c = bs_price(OptionKind::Call, s, 100.0, t, 0.05, q, 0.3).price;
                const double p = bs_price(OptionKind::Put, s, 100.0, t, 0.05, q, 0.3).price;
                const double fwd = s * std::exp(-q * t) - 100.0 * std::exp(-0.05 * t);
                EXPECT_NEAR(c - p, fwd, 1e-12 * std::max(1.0, c));
            }
        }
    }
}

TEST(BlackScholes, GreeksMatchFiniteDifferences) {
    for (auto kind : {OptionKind::Call, OptionKind::Put}) {
        for (double s : {70.0, 100.0, 140.0}) {
            const double h = 1e-4 * s;
            const auto px = [&](double x) { return bs_price(kind, x, 100.0, 1.5, 0.04, 0.01, 0.35).price; };
            const auto q = bs_price(kind, s, 100.0, 1.5, 0.04, 0.01, 0.35);
            const double fd_delta = (px(s + h) - px(s - h)) / (2 * h);
            const double fd_gamma = (px(s + h) - 2 * px(s) + px(s - h)) / (h * h);
            EXPECT_NEAR(fd_delta, q.delta, 1e-6 * std::abs(q.delta) + 1e-9);
            EXPECT_NEAR(fd_gamma, q.gamma, 1e-5 * q.gamma);
        }
    }
}

TEST(BlackScholes, DeltaAndGammaBounds) {
    const double q = 0.02, t = 1.3;
    for (double s = 10.0; s < 400.0; s += 15.0) {
        const auto c = bs_price(OptionKind::Call, s, 100.0, t, 0.05, q, 0.4);
        const auto p = bs_price(OptionKind::Put, s, 100.0, t, 0.05, q, 0.4);
        EXPECT_GE(c.delta, 0.0);
        EXPECT_LE(c.delta, std::exp(-q * t));
        EXPECT_LE(p.delta, 0.0);
        EXPECT_GE(p.delta, -std::exp(-q * t));
        EXPECT_GE(c.gamma, 0.0);
    }
}

TEST(BlackScholes, RejectsNonPositiveInputs) {
    EXPECT_THROW((void)bs_price(OptionKind::Call, 0.0, 100.0, 1.0, 0.05, 0.0, 0.2), FvaError);
    EXPECT_THROW((void)bs_price(OptionKind::Call, 100.0, 100.0, 1.0, 0.05, 0.0, 0.0), FvaError);
}

TEST(LongPosition, ClassicConfigIsBlackScholes) {
    const auto q = long_position_price(OptionKind::Call, kSpot, kStrike, kExpiry, fixtures::classic());
    EXPECT_NEAR(q.price, 35.14522192715943, 1e-11);
}

TEST(LongPosition, HaircutIrrelevantWhenRepoEqualsUnsecured) {
    auto c = fixtures::classic();
    c.r_b = kRate + 0.005;
    c.repo_rate = kRate + 0.005;
    c.repo_haircut = 0.35;
    auto c0 = c;
    c0.repo_haircut = 0.0;
    EXPECT_NEAR(long_position_price(OptionKind::Put, kSpot, kStrike, kExpiry, c).price,
                long_position_price(OptionKind::Put, kSpot, kStrike, kExpiry, c0).price, 1e-12);
}

TEST(LongPosition, PutUnderRepoFinancing) {
    auto c = fixtures::classic();
    c.r_b = kRate + 0.02;
    c.repo_rate = kRate + 0.005;
    c.repo_haircut = 0.35;
    const auto q = long_position_price(OptionKind::Put, kSpot, kStrike, kExpiry, c);
    EXPECT_NEAR(q.price, 15.83849067771846, 1e-10);
    EXPECT_NEAR(q.delta, -0.2480175406229984, 1e-12);
    EXPECT_LT(q.price, 17.0183);
}

TEST(LongPosition, NeverAboveRiskFree) {
    for (double spread : {0.0, 0.01, 0.03}) {
        for (double repo : {0.0, 0.005, 0.015}) {
            for (double h : {0.0, 0.25, 0.35}) {
                auto c = fixtures::classic();
                c.r_b = kRate + spread;
                c.repo_rate = kRate + repo;
                c.rebate_rate = kRate - repo;
                c.repo_haircut = h;
                c.sec_haircut = h;
                for (auto kind : {OptionKind::Call, OptionKind::Put}) {
                    const double v = long_position_price(kind, kSpot, kStrike, kExpiry, c).price;
                    EXPECT_LE(v, bs_price(kind, kSpot, kStrike, kExpiry, kRate, 0.0, kVol).price + 1e-12);
                }
            }
        }
    }
}

TEST(ZeroHaircut, CollapsesWithoutSpreads) {
    const auto q = zero_haircut_spread(OptionKind::Call, kSpot, kStrike, kExpiry, fixtures::classic());
    EXPECT_NEAR(q.spread, 0.0, 1e-12);
    EXPECT_NEAR(q.bid, 35.14522192715943, 1e-11);
}

TEST(ZeroHaircut, CallGolden) {
    const auto q = zero_haircut_spread(OptionKind::Call, kSpot, kStrike, kExpiry, fixtures::zero_haircut());
    EXPECT_NEAR(q.ask, 35.88897607810021, 1e-10);
    EXPECT_NEAR(q.bid, 32.40936939320069, 1e-10);
    EXPECT_NEAR(q.spread, 3.479606684899514, 1e-10);
}

TEST(ZeroHaircut, PutGolden) {
    const auto q = zero_haircut_spread(OptionKind::Put, kSpot, kStrike, kExpiry, fixtures::zero_haircut());
    EXPECT_NEAR(q.ask, 17.28154480507048, 1e-10);
    EXPECT_NEAR(q.bid, 15.78118094729353, 1e-10);
    EXPECT_NEAR(q.spread, 1.500363857776954, 1e-10);
}

TEST(ZeroHaircut, BracketsRiskFree) {
    for (auto kind : {OptionKind::Call, OptionKind::Put}) {
        for (double s : {60.0, 100.0, 160.0}) {
            const auto q = zero_haircut_spread(kind, s, kStrike, kExpiry, fixtures::zero_haircut());
            const double v = bs_price(kind, s, kStrike, kExpiry, kRate, 0.0, kVol).price;
            EXPECT_LE(q.bid, v);
            EXPECT_GE(q.ask, v);
        }
    }
}

TEST(ZeroHaircut, RefusesHaircuts) {
    try {
        (void)zero_haircut_spread(OptionKind::Call, kSpot, kStrike, kExpiry, fixtures::funded());
        FAIL();
    } catch (const FvaError& e) {
        EXPECT_EQ(e.code(), ErrorCode::HaircutNotZero);
    }
}

TEST(ImpliedVol, RecoversTableVol) {
    EXPECT_NEAR(implied_vol(OptionKind::Call, kSpot, kStrike, kExpiry, kRate, 0.0, 35.14522192715943), 0.5, 1e-10);
    EXPECT_NEAR(implied_vol(OptionKind::Call, kSpot, kStrike, kExpiry, kRate, 0.0, 35.1452), 0.5, 1e-5);
}

TEST(ImpliedVol, RoundTripsAcrossMoneyness) {
    for (auto kind : {OptionKind::Call, OptionKind::Put}) {
        for (double k : {50.0, 90.0, 100.0, 120.0, 200.0}) {
            for (double vol : {0.05, 0.2, 0.8, 2.0}) {
                const double px = bs_price(kind, 100.0, k, 1.0, 0.03, 0.01, vol).price;
                const auto fwd_value = 100.0 * std::exp(-0.01) - k * std::exp(-0.03);
                const double floor = std::max(kind == OptionKind::Call ? fwd_value : -fwd_value, 0.0);
                if (px - floor < 1e-6) continue;  // no time value left to invert
                EXPECT_NEAR(implied_vol(kind, 100.0, k, 1.0, 0.03, 0.01, px), vol, 1e-6 * vol) << k << ' ' << vol;
            }
        }
    }
}

TEST(ImpliedVol, OutOfBounds) {
    for (double target : {100.0, 150.0, 0.0}) {
        try {
            (void)implied_vol(OptionKind::Call, kSpot, kStrike, kExpiry, kRate, 0.0, target);
            ADD_FAILURE() << target;
        } catch (const FvaError& e) {
            EXPECT_EQ(e.code(), ErrorCode::PriceOutOfBounds);
        }
    }
}
