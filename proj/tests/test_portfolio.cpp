#include <gtest/gtest.h>

#include "common.hpp"
#include "fva/portfolio.hpp"

using namespace fva;

namespace {

NettingReport report(const Portfolio& book, const FundingConfig& c) {
    return netting_report(book, c, fixtures::kSpot, make_grid(book, fixtures::kSpot, c.sigma));
}

Portfolio strategy(Strategy s, double t) {
    static const double one[] = {100.0};
    static const double two[] = {95.0, 105.0};
    const bool pair = s == Strategy::Bull || s == Strategy::Strangle;
    return pair ? build_strategy(s, two, t) : build_strategy(s, one, t);
}

}  // namespace

TEST(Strategies, Legs) {
    const auto bull = strategy(Strategy::Bull, 1.0);
    ASSERT_EQ(bull.legs().size(), 2u);
    EXPECT_EQ(bull.legs()[0], (OptionLeg{OptionKind::Call, 95.0, 1.0}));
    EXPECT_EQ(bull.legs()[1], (OptionLeg{OptionKind::Call, 105.0, -1.0}));

    const auto strangle = strategy(Strategy::Strangle, 1.0);
    EXPECT_EQ(strangle.legs()[0], (OptionLeg{OptionKind::Call, 105.0, 1.0}));
    EXPECT_EQ(strangle.legs()[1], (OptionLeg{OptionKind::Put, 95.0, 1.0}));

    const auto strip = strategy(Strategy::Strip, 1.0);
    EXPECT_EQ(strip.legs()[0], (OptionLeg{OptionKind::Call, 100.0, 1.0}));
    EXPECT_EQ(strip.legs()[1], (OptionLeg{OptionKind::Put, 100.0, 2.0}));

    const auto straddle = strategy(Strategy::Straddle, 1.0);
    EXPECT_EQ(straddle.legs()[1], (OptionLeg{OptionKind::Put, 100.0, 1.0}));
}

TEST(Strategies, BadStrikes) {
    const double reversed[] = {105.0, 95.0};
    const double one[] = {100.0};
    const double negative[] = {-1.0};
    const auto code = [](auto&& f) {
        try {
            f();
        } catch (const FvaError& e) {
            return e.code();
        }
        return ErrorCode::InvalidInput;
    };
    EXPECT_EQ(code([&] { (void)build_strategy(Strategy::Bull, reversed, 1.0); }), ErrorCode::BadStrikes);
    EXPECT_EQ(code([&] { (void)build_strategy(Strategy::Strangle, one, 1.0); }), ErrorCode::BadStrikes);
    EXPECT_EQ(code([&] { (void)build_strategy(Strategy::Straddle, reversed, 1.0); }), ErrorCode::BadStrikes);
    EXPECT_EQ(code([&] { (void)build_strategy(Strategy::Strip, negative, 1.0); }), ErrorCode::BadStrikes);
}

TEST(Strategies, NamesRoundTrip) {
    for (auto s : {Strategy::Bull, Strategy::Straddle, Strategy::Strangle, Strategy::Strip})
        EXPECT_EQ(parse_strategy(to_string(s)), s);
    EXPECT_THROW((void)parse_strategy("butterfly"), FvaError);
}

TEST(Netting, NoSpreadsNoEffect) {
    const auto c = fixtures::classic();
    const auto r = report(strategy(Strategy::Straddle, 1.0), c);
    EXPECT_NEAR(r.netted_bid, r.netted_ask, 1e-10);
    EXPECT_NEAR(r.synthetic_bid, r.netted_bid, 1e-9);
    EXPECT_NEAR(r.synthetic_ask, r.netted_bid, 1e-9);
    EXPECT_NEAR(r.netting_effect, 0.0, 1e-9);
}

TEST(Netting, EffectPositiveAndSpreadsOrdered) {
    const auto c = fixtures::funded();
    for (auto s : {Strategy::Bull, Strategy::Straddle, Strategy::Strangle, Strategy::Strip}) {
        for (double t : {0.5, 2.0}) {
            const auto r = report(strategy(s, t), c);
            EXPECT_GT(r.netting_effect, 0.0) << to_string(s) << ' ' << t;
            EXPECT_LE(r.netted_bid, r.netted_ask);
            EXPECT_NEAR(r.netted_spread, r.netted_ask - r.netted_bid, 1e-12);
            EXPECT_NEAR(r.netting_effect, r.synthetic_spread - r.netted_spread, 1e-12);
        }
    }
}

TEST(Netting, SpreadGrowsWithExpiry) {
    const auto c = fixtures::funded();
    for (auto s : {Strategy::Straddle, Strategy::Strangle, Strategy::Strip}) {
        double prev = 0.0;
        for (double t : {0.25, 0.5, 1.0, 2.0, 3.0}) {
            const double spread = report(strategy(s, t), c).netted_spread;
            EXPECT_GE(spread, prev) << to_string(s) << ' ' << t;
            prev = spread;
        }
    }
}

TEST(Netting, BookQuotesAreNettedSolves) {
    const auto c = fixtures::funded();
    const auto book = strategy(Strategy::Bull, 1.0);
    const auto grid = make_grid(book, fixtures::kSpot, c.sigma);
    const auto r = netting_report(book, c, fixtures::kSpot, grid);
    EXPECT_DOUBLE_EQ(r.netted_bid, solve(book, Side::Bid, c, fixtures::kSpot, grid).price);
    EXPECT_DOUBLE_EQ(r.netted_ask, solve(book, Side::Ask, c, fixtures::kSpot, grid).price);
}
