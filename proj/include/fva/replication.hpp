#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "fva/analytic.hpp"
#include "fva/errors.hpp"
#include "fva/funding.hpp"
#include "fva/market.hpp"
#include "fva/pde.hpp"

namespace fva {

/// Position value U and its spot sensitivity at (t, S).
struct ValueSlope {
    double value = 0.0;
    double slope = 0.0;
};

using PricingOracle = std::function<ValueSlope(double t, double s)>;

namespace detail {

inline const OptionLeg& single_european_leg(const Portfolio& option) {
    if (option.legs().size() != 1 || option.style() != ExerciseStyle::European)
        throw FvaError(ErrorCode::InvalidInput, "hedge simulation needs a single European leg");
    return option.legs().front();
}

}  // namespace detail

/// Closed-form oracle: the classic formula for a degenerate economy, the
/// shifted-rate formula for a long option, the zero-haircut formula for a
/// short one. Anything else has no closed form.
[[nodiscard]] inline PricingOracle analytic_oracle(const Portfolio& option, Side side, const FundingConfig& config) {
    const OptionLeg leg = detail::single_european_leg(option);
    const double expiry = option.expiry();
    const double units = side_sign(side) * leg.quantity;
    const double scale = std::abs(units);

    if (side == Side::RiskFree || config.is_degenerate()) {
        return [=](double t, double s) {
            const auto q = bs_price(leg.kind, s, leg.strike, expiry - t, config.r, config.q, config.sigma);
            return ValueSlope{units * q.price, units * q.delta};
        };
    }
    if (units > 0.0) {
        return [=](double t, double s) {
            const auto q = long_position_price(leg.kind, s, leg.strike, expiry - t, config);
            return ValueSlope{scale * q.price, scale * q.delta};
        };
    }
    if (config.repo_haircut == 0.0 && config.sec_haircut == 0.0 && !config.no_repo) {
        const double carry = (leg.kind == OptionKind::Call ? config.repo_rate : config.rebate_rate) - config.q;
        return [=](double t, double s) {
            detail::require_positive(s, leg.strike, expiry - t, config.sigma);
            const auto q = detail::black(leg.kind, s, leg.strike, expiry - t, config.r, carry, config.sigma);
            return ValueSlope{-scale * q.price, -scale * q.delta};
        };
    }
    throw FvaError(ErrorCode::OracleUnavailable, "no closed form for a short option with haircuts");
}

/// Oracle backed by a stored PDE surface, interpolated linearly in t and S.
class SurfaceOracle {
public:
    SurfaceOracle(const PricingResult& result, const PdeGrid& grid)
        : times_(result.surface_times), values_(result.surface), ds_(grid.ds()) {
        if (values_.size() < 2 || values_.size() != times_.size())
            throw FvaError(ErrorCode::OracleUnavailable, "pricing result carries no surface");
        slopes_.reserve(values_.size());
        for (const auto& u : values_) {
            const std::size_t n = u.size();
            std::vector<double> d(n);
            d[0] = (u[1] - u[0]) / ds_;
            d[n - 1] = (u[n - 1] - u[n - 2]) / ds_;
            for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2.0 * ds_);
            slopes_.push_back(std::move(d));
        }
    }

    [[nodiscard]] ValueSlope operator()(double t, double s) const {
        // times_ runs from expiry down to 0.
        std::size_t k = 0;
        while (k + 2 < times_.size() && times_[k + 1] > t) ++k;
        const double span = times_[k] - times_[k + 1];
        const double w = std::clamp((times_[k] - t) / span, 0.0, 1.0);
        const auto a = at(k, s);
        const auto b = at(k + 1, s);
        return {(1.0 - w) * a.value + w * b.value, (1.0 - w) * a.slope + w * b.slope};
    }

private:
    [[nodiscard]] ValueSlope at(std::size_t k, double s) const {
        const auto& u = values_[k];
        const auto& d = slopes_[k];
        const std::size_t n = u.size();
        const double x = s / ds_;
        if (x >= static_cast<double>(n - 1)) {
            return {u[n - 1] + d[n - 1] * (s - ds_ * static_cast<double>(n - 1)), d[n - 1]};
        }
        const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(x)));
        const double w = x - static_cast<double>(i);
        return {(1.0 - w) * u[i] + w * u[i + 1], (1.0 - w) * d[i] + w * d[i + 1]};
    }

    std::vector<double> times_;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<double>> slopes_;
    double ds_;
};

[[nodiscard]] inline PricingOracle pde_oracle(const Portfolio& option, Side side, const FundingConfig& config,
                                              double spot, const PdeGrid& grid, SolverParams params = {}) {
    params.keep_surface = true;
    auto result = solve(option, side, config, spot, grid, params);
    return [oracle = std::make_shared<SurfaceOracle>(result, grid)](double t, double s) { return (*oracle)(t, s); };
}

/// Closed form when one exists, PDE surface otherwise.
[[nodiscard]] inline PricingOracle default_oracle(const Portfolio& option, Side side, const FundingConfig& config,
                                                  double spot, const PdeGrid& grid) {
    try {
        return analytic_oracle(option, side, config);
    } catch (const FvaError& e) {
        if (e.code() != ErrorCode::OracleUnavailable) throw;
    }
    return pde_oracle(option, side, config, spot, grid);
}

/// Replication economy of one path at one instant.
struct LedgerState {
    double t = 0.0;
    double s = 0.0;
    double holding = 0.0;
    double deposit = 0.0;    // M
    double unsecured = 0.0;  // N
    double repo = 0.0;       // R
    double position_value = 0.0;
    double pi = 0.0;  // M + holding S + U - R - N

    [[nodiscard]] double wealth() const noexcept { return deposit + holding * s + position_value - repo - unsecured; }
};

struct HedgeRun {
    std::size_t n_paths = 10000;
    std::size_t n_steps = 250;
    double mu = 0.0;
    std::uint64_t seed = 0;
    double spot = 100.0;
};

struct HedgeSummary {
    double mean = 0.0;  // of the discounted terminal wealth
    double std = 0.0;
    double max_abs = 0.0;
    double mean_abs = 0.0;
    double std_error = 0.0;
    double max_identity_error = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Fixed-shape pairwise sum; the result does not depend on thread count.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double acc = 0.0;
        for (double v : x) acc += v;
        return acc;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

struct PathOutcome {
    double pi_terminal = 0.0;
    double identity_error = 0.0;
};

inline PathOutcome hedge_path(const OptionLeg& leg, double expiry, Side side, const FundingConfig& config,
                              const PricingOracle& oracle, const HedgeRun& run, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(run.seed), static_cast<std::uint32_t>(run.seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;

    const double dt = expiry / static_cast<double>(run.n_steps);
    const double sigma = config.sigma;
    const double units = side_sign(side) * leg.quantity;

    LedgerState st;
    st.s = run.spot;
    const auto start = oracle(0.0, st.s);
    const auto acc0 = funding_accounts(start.value, start.slope, st.s, config);
    st.position_value = start.value;
    st.holding = acc0.holding;
    st.repo = acc0.repo;
    st.deposit = acc0.deposit;
    st.unsecured = acc0.unsecured;
    double pi_acc = st.wealth();
    double identity_error = 0.0;

    for (std::size_t k = 1; k <= run.n_steps; ++k) {
        const bool last = k == run.n_steps;
        const double z = normal(rng);
        const double s_new = st.s * std::exp((run.mu - 0.5 * sigma * sigma) * dt + sigma * std::sqrt(dt) * z);
        const double t_new = last ? expiry : dt * static_cast<double>(k);
        const auto sel = select_financing(sign_of(st.holding), config);

        // Interest and dividends on the pre-move balances, compounded over the step.
        const double carry = std::expm1(config.r * dt) * st.deposit - std::expm1(config.r_b * dt) * st.unsecured -
                             std::expm1(sel.r_p * dt) * st.repo + std::expm1(config.q * dt) * st.holding * st.s;

        double holding_new = st.holding;
        double value_new = 0.0;
        if (last) {
            value_new = units * intrinsic(leg.kind, leg.strike, s_new);
        } else {
            const auto vs = oracle(t_new, s_new);
            value_new = vs.value;
            holding_new = hedge_holding(vs.slope);
        }
        const auto sel_new = select_financing(sign_of(holding_new), config);
        const double repo_new = (1.0 - sel_new.h_signed) * holding_new * s_new;

        // Trade at the post-move price, reset the repo, route net cash.
        const double cash = carry - (holding_new - st.holding) * s_new + (repo_new - st.repo);
        const double net = st.deposit - st.unsecured + cash;

        pi_acc += carry + st.holding * (s_new - st.s) + (value_new - st.position_value);

        st.t = t_new;
        st.s = s_new;
        st.holding = holding_new;
        st.repo = repo_new;
        st.position_value = value_new;
        st.deposit = std::max(net, 0.0);
        st.unsecured = std::max(-net, 0.0);
        st.pi = st.wealth();
        identity_error = std::max(identity_error, std::abs(st.pi - pi_acc));
    }
    return {st.pi * std::exp(-config.r * expiry), identity_error};
}

}  // namespace detail

/// Simulates the self-financing hedge of a European option along lognormal
/// paths with drift `mu` and reports the distribution of terminal wealth.
/// Zero wealth at expiry, path by path, is what replication means; the
/// spread around zero is discrete-hedging error.
[[nodiscard]] inline HedgeSummary simulate_hedge(const Portfolio& option, Side side, const FundingConfig& input_config,
                                                 const HedgeRun& run, const PricingOracle& oracle) {
    require_valid(input_config);
    const FundingConfig config = side == Side::RiskFree ? input_config.degenerate() : input_config;
    const OptionLeg leg = detail::single_european_leg(option);
    if (run.n_paths < 2 || run.n_steps < 1) throw FvaError(ErrorCode::InvalidInput, "need >= 2 paths and >= 1 step");
    if (!oracle) throw FvaError(ErrorCode::OracleUnavailable, "no pricing oracle supplied");

    std::vector<detail::PathOutcome> out(run.n_paths);
    const std::size_t workers =
        std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(1, run.n_paths / 64));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t p = w; p < run.n_paths; p += workers)
                    out[p] = detail::hedge_path(leg, option.expiry(), side, config, oracle, run, p);
            });
        }
    }

    std::vector<double> pis(run.n_paths), abs_pis(run.n_paths);
    HedgeSummary sum;
    for (std::size_t p = 0; p < run.n_paths; ++p) {
        pis[p] = out[p].pi_terminal;
        abs_pis[p] = std::abs(pis[p]);
        sum.max_abs = std::max(sum.max_abs, abs_pis[p]);
        sum.max_identity_error = std::max(sum.max_identity_error, out[p].identity_error);
    }
    const double n = static_cast<double>(run.n_paths);
    sum.mean = detail::pairwise_sum(pis) / n;
    sum.mean_abs = detail::pairwise_sum(abs_pis) / n;
    for (auto& v : pis) v = (v - sum.mean) * (v - sum.mean);
    sum.std = std::sqrt(detail::pairwise_sum(pis) / (n - 1.0));
    sum.std_error = sum.std / std::sqrt(n);
    sum.n_paths = run.n_paths;
    sum.n_steps = run.n_steps;
    sum.seed = run.seed;
    return sum;
}

}  // namespace fva
