#pragma once

#include <cmath>
#include <numbers>

#include "fva/errors.hpp"
#include "fva/funding.hpp"
#include "fva/market.hpp"

namespace fva {

[[nodiscard]] inline double norm_cdf(double x) noexcept { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

[[nodiscard]] inline double norm_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

struct BsQuote {
    double price = 0.0;
    double delta = 0.0;
    double gamma = 0.0;
};

namespace detail {

inline void require_positive(double S, double K, double T, double sigma) {
    if (!(S > 0.0) || !(K > 0.0) || !(T > 0.0) || !(sigma > 0.0) || !std::isfinite(S) || !std::isfinite(K) ||
        !std::isfinite(T) || !std::isfinite(sigma))
        throw FvaError(ErrorCode::InvalidInput, "S, K, T and sigma must be positive and finite");
}

// Lognormal expectation with stock drift `carry` and discounting at `discount`.
// Greeks are with respect to the spot S.
inline BsQuote black(OptionKind kind, double S, double K, double T, double discount, double carry, double sigma) {
    const double sqrt_t = std::sqrt(T);
    const double vol_t = sigma * sqrt_t;
    const double growth = std::exp(carry * T);
    const double df = std::exp(-discount * T);
    const double forward = S * growth;
    const double d1 = (std::log(forward / K) + 0.5 * vol_t * vol_t) / vol_t;
    const double d2 = d1 - vol_t;

    BsQuote q;
    q.gamma = df * growth * norm_pdf(d1) / (S * vol_t);
    if (kind == OptionKind::Call) {
        q.price = df * (forward * norm_cdf(d1) - K * norm_cdf(d2));
        q.delta = df * growth * norm_cdf(d1);
    } else {
        q.price = df * (K * norm_cdf(-d2) - forward * norm_cdf(-d1));
        q.delta = -df * growth * norm_cdf(-d1);
    }
    return q;
}

}  // namespace detail

/// Classic Black-Scholes with continuous dividend yield.
[[nodiscard]] inline BsQuote bs_price(OptionKind kind, double S, double K, double T, double r, double q,
                                      double sigma) {
    detail::require_positive(S, K, T, sigma);
    return detail::black(kind, S, K, T, r, r - q, sigma);
}

/// Closed form for a long vanilla option under funding costs.
///
/// A long option's unsecured need V - h S V_S is never negative, so the
/// pricing equation is linear: drift h r_b + (1 - h) r_p - q, discount r_b.
/// The hedge is short stock for a call and long stock for a put, which picks
/// the financing branch.
[[nodiscard]] inline BsQuote long_position_price(OptionKind kind, double S, double K, double T,
                                                 const FundingConfig& config) {
    detail::require_positive(S, K, T, config.sigma);
    const int holding = kind == OptionKind::Call ? -1 : 1;
    const auto sel = select_financing(holding, config);
    const double carry = sel.h_signed * config.r_b + (1.0 - sel.h_signed) * sel.r_p - config.q;
    return detail::black(kind, S, K, T, config.r_b, carry, config.sigma);
}

struct SpreadQuote {
    double bid = 0.0;
    double ask = 0.0;
    double spread = 0.0;
};

/// Bid and ask with both haircuts at zero.
///
/// Calls: ask carries at the repo rate and discounts at r, bid carries at the
/// rebate rate and discounts at r_b. Puts swap the two carry rates.
[[nodiscard]] inline SpreadQuote zero_haircut_spread(OptionKind kind, double S, double K, double T,
                                                     const FundingConfig& config) {
    if (config.repo_haircut != 0.0 || config.sec_haircut != 0.0 || config.no_repo)
        throw FvaError(ErrorCode::HaircutNotZero, "zero-haircut formula called with a nonzero haircut");
    detail::require_positive(S, K, T, config.sigma);
    const double r1 = config.repo_rate;
    const double r2 = config.rebate_rate;
    const double ask_carry = (kind == OptionKind::Call ? r1 : r2) - config.q;
    const double bid_carry = (kind == OptionKind::Call ? r2 : r1) - config.q;
    SpreadQuote out;
    out.ask = detail::black(kind, S, K, T, config.r, ask_carry, config.sigma).price;
    out.bid = detail::black(kind, S, K, T, config.r_b, bid_carry, config.sigma).price;
    out.spread = out.ask - out.bid;
    return out;
}

/// Black-Scholes implied volatility. Newton from a Brenner-Subrahmanyam seed,
/// falling back to bisection on [1e-6, 5] whenever a step leaves the bracket.
[[nodiscard]] inline double implied_vol(OptionKind kind, double S, double K, double T, double r, double q,
                                        double target_price) {
    if (!(S > 0.0) || !(K > 0.0) || !(T > 0.0) || !std::isfinite(target_price))
        throw FvaError(ErrorCode::InvalidInput, "S, K, T must be positive");
    const double df_stock = std::exp(-q * T);
    const double df_cash = std::exp(-r * T);
    const double lower = kind == OptionKind::Call ? std::max(S * df_stock - K * df_cash, 0.0)
                                                  : std::max(K * df_cash - S * df_stock, 0.0);
    const double upper = kind == OptionKind::Call ? S * df_stock : K * df_cash;
    if (!(target_price > lower) || !(target_price < upper))
        throw FvaError(ErrorCode::PriceOutOfBounds, "target price outside no-arbitrage bounds");

    constexpr double lo_vol = 1e-6;
    constexpr double hi_vol = 5.0;
    const auto price_at = [&](double vol) { return detail::black(kind, S, K, T, r, r - q, vol).price; };
    if (target_price >= price_at(hi_vol))
        throw FvaError(ErrorCode::PriceOutOfBounds, "target price needs volatility above 5");
    if (target_price <= price_at(lo_vol))
        throw FvaError(ErrorCode::PriceOutOfBounds, "target price needs volatility below 1e-6");

    double a = lo_vol;
    double b = hi_vol;
    double vol = std::sqrt(2.0 * std::numbers::pi / T) * target_price / S;
    if (!(vol > a && vol < b)) vol = 0.5 * (a + b);

    for (int iter = 0; iter < 200; ++iter) {
        const double diff = price_at(vol) - target_price;
        if (std::abs(diff) < 1e-12) return vol;
        if (diff > 0.0)
            b = vol;
        else
            a = vol;
        const double vega = S * df_stock * norm_pdf((std::log(S / K) + (r - q + 0.5 * vol * vol) * T) /
                                                    (vol * std::sqrt(T))) * std::sqrt(T);
        double next = vega > 0.0 ? vol - diff / vega : 0.5 * (a + b);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(next - vol) < 1e-15) return next;
        vol = next;
    }
    return vol;
}

}  // namespace fva
