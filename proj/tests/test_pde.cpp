#include <cmath>

#include <gtest/gtest.h>

#include "common.hpp"
#include "fva/analytic.hpp"
#include "fva/pde.hpp"
#include "oracles/crr.hpp"

using namespace fva;
using fixtures::kExpiry;
using fixtures::kRate;
using fixtures::kSpot;
using fixtures::kStrike;
using fixtures::kVol;

namespace {

Portfolio vanilla(OptionKind kind, ExerciseStyle style = ExerciseStyle::European) {
    return Portfolio::single(kind, kStrike, kExpiry, 1.0, style);
}

PricingResult table_case(OptionKind kind, std::size_t nodes = 2000, double dt = 0.02, SolverParams params = {}) {
    const auto book = vanilla(kind);
    return solve(book, Side::RiskFree, fixtures::classic(), kSpot, make_grid(book, kSpot, kVol, nodes, dt), params);
}

PricingResult funded_solve(const Portfolio& book, Side side, const FundingConfig& c, double spot = kSpot) {
    return price_book(book, side, c, spot, make_grid(book, spot, c.sigma));
}

}  // namespace

TEST(Grid, CoversRangeAndPlacesSpotAndStrikeOnNodes) {
    const auto book = vanilla(OptionKind::Call);
    const auto g = make_grid(book, kSpot, kVol);
    EXPECT_EQ(g.size(), 2000u);
    EXPECT_EQ(g.s_nodes.front(), 0.0);
    EXPECT_GE(g.s_max(), min_grid_upper(book, kSpot, kVol));
    EXPECT_GE(g.s_max(), 4.0 * kStrike);
    const double k = kStrike / g.ds();
    EXPECT_NEAR(k, std::round(k), 1e-9);
    EXPECT_EQ(g.n_steps, 100u);
    EXPECT_DOUBLE_EQ(g.dt, 0.02);
}

TEST(Grid, StepDividesExpiry) {
    const auto g = PdeGrid::uniform(400.0, 101, 1.0, 0.03);
    EXPECT_EQ(g.n_steps, 34u);
    EXPECT_NEAR(g.dt * 34, 1.0, 1e-14);
}

TEST(Grid, TooCoarse) {
    const auto book = vanilla(OptionKind::Call);
    try {
        (void)make_grid(book, kSpot, kVol, 2);
        FAIL();
    } catch (const FvaError& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridTooCoarse);
    }
    EXPECT_THROW((void)solve(book, Side::Bid, fixtures::classic(), 1e4, make_grid(book, kSpot, kVol)), FvaError);
}

TEST(Solver, TableCallWithinBounds) {
    const auto fd = table_case(OptionKind::Call);
    const auto bs = bs_price(OptionKind::Call, kSpot, kStrike, kExpiry, kRate, 0.0, kVol);
    EXPECT_NEAR(fd.price, bs.price, 5e-3);
    EXPECT_NEAR(fd.delta, bs.delta, 5e-4);
    EXPECT_NEAR(fd.gamma, bs.gamma, 1e-4);
}

TEST(Solver, TablePutWithinBounds) {
    const auto fd = table_case(OptionKind::Put);
    const auto bs = bs_price(OptionKind::Put, kSpot, kStrike, kExpiry, kRate, 0.0, kVol);
    EXPECT_NEAR(fd.price, bs.price, 5e-3);
    EXPECT_NEAR(fd.delta, bs.delta, 5e-4);
    EXPECT_NEAR(fd.gamma, bs.gamma, 1e-4);
    EXPECT_NEAR(fd.price, 17.0173, 5e-3);
}

TEST(Solver, SecondOrderConvergence) {
    const double exact = bs_price(OptionKind::Put, kSpot, kStrike, kExpiry, kRate, 0.0, kVol).price;
    const double coarse = std::abs(table_case(OptionKind::Put, 500, 0.08).price - exact);
    const double fine = std::abs(table_case(OptionKind::Put, 1000, 0.04).price - exact);
    EXPECT_GE(coarse / fine, 3.0);
}

TEST(Solver, SmoothingStartImprovesGamma) {
    const double exact = bs_price(OptionKind::Call, kSpot, kStrike, kExpiry, kRate, 0.0, kVol).gamma;
    SolverParams plain;
    plain.rannacher_steps = 0;
    const double rough = std::abs(table_case(OptionKind::Call, 2000, 0.02, plain).gamma - exact);
    const double smooth = std::abs(table_case(OptionKind::Call, 2000, 0.02).gamma - exact);
    EXPECT_LT(smooth, rough);
}

TEST(Solver, GreeksMatchBumpAndReprice) {
    for (auto kind : {OptionKind::Call, OptionKind::Put}) {
        const auto book = vanilla(kind);
        const auto grid = make_grid(book, kSpot, kVol);
        const double h = 1.0;
        const auto at = [&](double s) { return solve(book, Side::RiskFree, fixtures::classic(), s, grid).price; };
        const auto base = solve(book, Side::RiskFree, fixtures::classic(), kSpot, grid);
        const double up = at(kSpot + h), dn = at(kSpot - h);
        EXPECT_NEAR((up - dn) / (2 * h), base.delta, 1e-3 * std::abs(base.delta));
        EXPECT_NEAR((up - 2 * base.price + dn) / (h * h), base.gamma, 1e-3 * base.gamma);
    }
}

TEST(Solver, SuperpositionWithoutFunding) {
    const Portfolio p1({{OptionKind::Call, 90.0, 1.0}}, kExpiry);
    const Portfolio p2({{OptionKind::Put, 120.0, 1.0}}, kExpiry);
    const Portfolio mix({{OptionKind::Call, 90.0, 2.0}, {OptionKind::Put, 120.0, -3.0}}, kExpiry);
    const auto grid = make_grid(mix, kSpot, kVol);
    const auto c = fixtures::classic();
    const double a = solve(p1, Side::Bid, c, kSpot, grid).value;
    const double b = solve(p2, Side::Bid, c, kSpot, grid).value;
    EXPECT_NEAR(solve(mix, Side::Bid, c, kSpot, grid).value, 2.0 * a - 3.0 * b, 1e-10);
}

TEST(Solver, SidesCollapseWithoutSpreads) {
    const auto book = vanilla(OptionKind::Put);
    const auto c = fixtures::classic();
    const double v = funded_solve(book, Side::RiskFree, c).price;
    EXPECT_NEAR(funded_solve(book, Side::Bid, c).price, v, 1e-12);
    EXPECT_NEAR(funded_solve(book, Side::Ask, c).price, v, 1e-12);
}

TEST(Solver, AskIsBidOfNegatedPosition) {
    const Portfolio book({{OptionKind::Call, 95.0, 1.0}, {OptionKind::Put, 110.0, 2.0}}, 1.5);
    const auto c = fixtures::funded();
    const auto grid = make_grid(book, kSpot, kVol);
    const auto ask = solve(book, Side::Ask, c, kSpot, grid);
    const auto neg = solve(book.scaled(-1.0), Side::Bid, c, kSpot, grid);
    EXPECT_NEAR(ask.value, neg.value, 1e-10);
    EXPECT_NEAR(ask.price, -neg.value, 1e-10);
}

TEST(Solver, ZeroHaircutMatchesClosedForm) {
    const auto c = fixtures::zero_haircut();
    for (auto kind : {OptionKind::Call, OptionKind::Put}) {
        const auto ref = zero_haircut_spread(kind, kSpot, kStrike, kExpiry, c);
        EXPECT_NEAR(funded_solve(vanilla(kind), Side::Bid, c).price, ref.bid, 1e-2);
        EXPECT_NEAR(funded_solve(vanilla(kind), Side::Ask, c).price, ref.ask, 1e-2);
    }
}

TEST(Solver, LongPositionMatchesClosedForm) {
    for (double h : {0.0, 0.25, 0.35}) {
        auto c = fixtures::funded();
        c.repo_haircut = h;
        c.sec_haircut = h;
        for (auto kind : {OptionKind::Call, OptionKind::Put}) {
            const double ref = long_position_price(kind, kSpot, kStrike, kExpiry, c).price;
            EXPECT_NEAR(funded_solve(vanilla(kind), Side::Bid, c).price, ref, 1e-2) << h;
        }
    }
}

TEST(Solver, FundedQuotesBracketReference) {
    const auto c = fixtures::funded();
    for (auto kind : {OptionKind::Call, OptionKind::Put}) {
        const auto book = vanilla(kind);
        const double bid = funded_solve(book, Side::Bid, c).price;
        const double ref = funded_solve(book, Side::RiskFree, c).price;
        const double ask = funded_solve(book, Side::Ask, c).price;
        EXPECT_LT(bid, ref);
        EXPECT_GT(ask, ref);
    }
}

TEST(Solver, QuotesWidenWithUnsecuredSpread) {
    const auto book = vanilla(OptionKind::Put);
    double prev_bid = 1e9, prev_ask = -1e9;
    for (double spread : {0.0, 0.01, 0.02, 0.04}) {
        auto c = fixtures::funded();
        c.r_b = c.r + spread;
        const double bid = funded_solve(book, Side::Bid, c).price;
        const double ask = funded_solve(book, Side::Ask, c).price;
        EXPECT_LE(bid, prev_bid + 1e-12);
        EXPECT_GE(ask, prev_ask - 1e-12);
        prev_bid = bid;
        prev_ask = ask;
    }
}

TEST(Solver, FundingBoundaryForMixedBook) {
    // A short straddle changes the sign of its hedge across the strike, so the
    // unsecured need switches on and off inside the grid.
    const Portfolio book({{OptionKind::Call, kStrike, 1.0}, {OptionKind::Put, kStrike, 1.0}}, kExpiry);
    const auto res = funded_solve(book, Side::Ask, fixtures::funded());
    ASSERT_FALSE(res.funding_boundary.empty());
    for (const auto& p : res.funding_boundary) {
        EXPECT_GE(p.t, 0.0);
        EXPECT_LT(p.t, kExpiry);
        EXPECT_GT(p.s, 0.0);
    }
    EXPECT_LE(res.diagnostics.max_funding_iterations, 50);
    EXPECT_TRUE(funded_solve(book, Side::Bid, fixtures::classic()).funding_boundary.empty());
}

TEST(Solver, ZeroGammaBoundaryKeepsLinearTail) {
    const auto book = Portfolio::single(OptionKind::Call, kStrike, 0.02);
    const auto grid = make_grid(book, kSpot, kVol, 400, 0.02);
    const auto res = solve(book, Side::RiskFree, fixtures::classic(), kSpot, grid);
    const auto& u = res.profile;
    const std::size_t n = u.size();
    const double tail = u[n - 1] - u[n - 2];
    EXPECT_NEAR(tail, grid.ds(), grid.dt * grid.ds());
    EXPECT_NEAR(u[n - 2] - u[n - 3], tail, grid.dt * grid.ds());
}

TEST(Solver, RejectsBadParameters) {
    const auto book = vanilla(OptionKind::Call);
    const auto grid = make_grid(book, kSpot, kVol, 200, 0.1);
    SolverParams p;
    p.psor_omega = 2.0;
    EXPECT_THROW((void)solve(book, Side::Bid, fixtures::classic(), kSpot, grid, p), FvaError);
    p = {};
    p.theta = 0.3;
    EXPECT_THROW((void)solve(book, Side::Bid, fixtures::classic(), kSpot, grid, p), FvaError);
    auto bad = fixtures::classic();
    bad.r_b = 0.0;
    EXPECT_THROW((void)solve(book, Side::Bid, bad, kSpot, grid), FvaError);
    EXPECT_THROW((void)solve_american(book, Side::Bid, fixtures::classic(), kSpot, grid), FvaError);
}

TEST(American, PutMatchesBinomialTree) {
    const auto res = funded_solve(vanilla(OptionKind::Put, ExerciseStyle::American), Side::RiskFree, fixtures::classic());
    const double tree = oracle::crr(false, true, kSpot, kStrike, kExpiry, kRate, 0.0, kVol, 2000);
    EXPECT_NEAR(res.price / tree - 1.0, 0.0, 5e-4);
    EXPECT_GT(res.price, table_case(OptionKind::Put).price);
}

TEST(American, CallWithoutDividendIsEuropean) {
    const auto am = funded_solve(vanilla(OptionKind::Call, ExerciseStyle::American), Side::RiskFree, fixtures::classic());
    EXPECT_NEAR(am.price, table_case(OptionKind::Call).price, 1e-6);
}

TEST(American, FundedQuotesBracketReference) {
    const auto book = vanilla(OptionKind::Put, ExerciseStyle::American);
    const auto c = fixtures::funded();
    const double bid = funded_solve(book, Side::Bid, c).price;
    const double ref = funded_solve(book, Side::RiskFree, c).price;
    const double ask = funded_solve(book, Side::Ask, c).price;
    EXPECT_LT(bid, ref);
    EXPECT_GT(ask, ref);
    EXPECT_GE(bid, kStrike - kSpot);
}

TEST(American, ProfileRespectsObstacle) {
    const auto book = vanilla(OptionKind::Put, ExerciseStyle::American);
    const auto c = fixtures::funded();
    const auto grid = make_grid(book, kSpot, kVol);
    const auto bid = solve_american(book, Side::Bid, c, kSpot, grid);
    const auto ask = solve_american(book, Side::Ask, c, kSpot, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double payoff = std::max(kStrike - grid.s_nodes[i], 0.0);
        EXPECT_GE(bid.profile[i], payoff - 1e-9);
        EXPECT_LE(ask.profile[i], -payoff + 1e-9);
    }
}
