#pragma once

#include <future>
#include <string>
#include <string_view>
#include <vector>

#include "fva/errors.hpp"
#include "fva/market.hpp"
#include "fva/pde.hpp"

namespace fva {

enum class Strategy { Bull, Straddle, Strangle, Strip };

[[nodiscard]] inline Strategy parse_strategy(std::string_view name) {
    if (name == "bull") return Strategy::Bull;
    if (name == "straddle") return Strategy::Straddle;
    if (name == "strangle") return Strategy::Strangle;
    if (name == "strip") return Strategy::Strip;
    throw FvaError(ErrorCode::InvalidInput, "unknown strategy '" + std::string(name) + "'");
}

[[nodiscard]] constexpr std::string_view to_string(Strategy s) noexcept {
    switch (s) {
    case Strategy::Bull: return "bull";
    case Strategy::Straddle: return "straddle";
    case Strategy::Strangle: return "strangle";
    case Strategy::Strip: return "strip";
    }
    return "?";
}

/// bull(K1 < K2) = +C(K1) - C(K2); straddle(K) = +C(K) + P(K);
/// strangle(K_put < K_call) = +C(K_call) + P(K_put); strip(K) = +C(K) + 2 P(K).
/// Two-strike strategies take {low, high}; one-strike strategies take {K}.
[[nodiscard]] inline Portfolio build_strategy(Strategy strategy, std::span<const double> strikes, double expiry) {
    const auto need = [&](std::size_t count) {
        if (strikes.size() != count)
            throw FvaError(ErrorCode::BadStrikes, std::string(to_string(strategy)) + " needs " +
                                                      std::to_string(count) + " strike(s)");
        for (double k : strikes)
            if (!(k > 0.0)) throw FvaError(ErrorCode::BadStrikes, "strikes must be positive");
    };
    using enum OptionKind;
    switch (strategy) {
    case Strategy::Bull:
        need(2);
        if (!(strikes[0] < strikes[1])) throw FvaError(ErrorCode::BadStrikes, "bull spread needs K1 < K2");
        return Portfolio({{Call, strikes[0], 1.0}, {Call, strikes[1], -1.0}}, expiry);
    case Strategy::Straddle:
        need(1);
        return Portfolio({{Call, strikes[0], 1.0}, {Put, strikes[0], 1.0}}, expiry);
    case Strategy::Strangle:
        need(2);
        if (!(strikes[0] < strikes[1])) throw FvaError(ErrorCode::BadStrikes, "strangle needs K_put < K_call");
        return Portfolio({{Call, strikes[1], 1.0}, {Put, strikes[0], 1.0}}, expiry);
    case Strategy::Strip:
        need(1);
        return Portfolio({{Call, strikes[0], 1.0}, {Put, strikes[0], 2.0}}, expiry);
    }
    throw FvaError(ErrorCode::InvalidInput, "unknown strategy");
}

/// Netted: the whole book is one economy financing only its net delta.
/// Synthetic: every leg is its own economy, priced on the side its sign
/// puts it on, and the results summed.
struct NettingReport {
    double netted_bid = 0.0;
    double netted_ask = 0.0;
    double synthetic_bid = 0.0;
    double synthetic_ask = 0.0;
    double netted_spread = 0.0;
    double synthetic_spread = 0.0;
    double netting_effect = 0.0;
};

[[nodiscard]] inline NettingReport netting_report(const Portfolio& portfolio, const FundingConfig& config, double spot,
                                                  const PdeGrid& grid, const SolverParams& params = {}) {
    // Holding the book long, a leg of quantity q is a position of q units;
    // holding it short, the same leg is a position of -q units. Either way the
    // leg's position value is the Bid-side solve of that signed position.
    const auto legs = portfolio.legs();
    std::vector<std::future<PricingResult>> jobs;
    jobs.push_back(std::async(std::launch::async, [&] { return price_book(portfolio, Side::Bid, config, spot, grid, params); }));
    jobs.push_back(std::async(std::launch::async, [&] { return price_book(portfolio, Side::Ask, config, spot, grid, params); }));
    for (const auto& leg : legs) {
        for (double sign : {1.0, -1.0}) {
            Portfolio single({OptionLeg{leg.kind, leg.strike, sign * leg.quantity, leg.style}}, portfolio.expiry());
            jobs.push_back(std::async(std::launch::async, [single = std::move(single), &config, spot, &grid, &params] {
                return price_book(single, Side::Bid, config, spot, grid, params);
            }));
        }
    }

    NettingReport rep;
    rep.netted_bid = jobs[0].get().price;
    rep.netted_ask = jobs[1].get().price;
    for (std::size_t i = 0; i < legs.size(); ++i) {
        rep.synthetic_bid += jobs[2 + 2 * i].get().value;
        rep.synthetic_ask -= jobs[3 + 2 * i].get().value;
    }
    rep.netted_spread = rep.netted_ask - rep.netted_bid;
    rep.synthetic_spread = rep.synthetic_ask - rep.synthetic_bid;
    rep.netting_effect = rep.synthetic_spread - rep.netted_spread;
    return rep;
}

}  // namespace fva
