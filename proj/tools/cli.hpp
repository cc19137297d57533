#pragma once

// fva-pricer command line: every command writes to a caller-supplied stream
// so the test suites can drive it in-process.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fva/analytic.hpp"
#include "fva/errors.hpp"
#include "fva/funding.hpp"
#include "fva/io.hpp"
#include "fva/market.hpp"
#include "fva/pde.hpp"
#include "fva/portfolio.hpp"
#include "fva/replication.hpp"

namespace fva::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitTolerance = 4;

inline constexpr double kTable1PriceTol = 5e-3;
inline constexpr double kTable1DeltaTol = 5e-4;
inline constexpr double kTable1GammaTol = 1e-4;

/// Error raised by the front end itself, carrying the exit code to use.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MarketArgs {
    double spot = 100.0;
    double strike = 100.0;
    double expiry = 2.0;
    std::string kind = "put";
    std::string style = "european";
    std::string portfolio_file;
    double rate = 0.10;
    double div = 0.0;
    double vol = 0.5;
    std::optional<double> borrow_rate, borrow_spread;
    std::optional<double> repo_rate, repo_spread;
    std::optional<double> rebate_rate, rebate_spread;
    double repo_haircut = 0.0;
    double sec_haircut = 0.0;
    bool no_repo = false;
};

struct GridArgs {
    std::size_t nodes = 2000;
    double dt = 0.02;
    int rannacher = 1;
    std::string config_file;  // consumed by expand_config before parsing
};

struct OutputArgs {
    std::string format = "json";
    std::string output;
};

inline void add_market_flags(CLI::App& app, MarketArgs& m, bool with_contract = true) {
    if (with_contract) {
        app.add_option("--kind", m.kind, "call or put")->check(CLI::IsMember({"call", "put"}));
        app.add_option("--strike", m.strike, "strike");
        app.add_option("--expiry", m.expiry, "expiry in years");
        app.add_option("--style", m.style, "european or american")->check(CLI::IsMember({"european", "american"}));
        app.add_option("--portfolio", m.portfolio_file, "portfolio JSON file (overrides kind/strike/expiry/style)");
    }
    app.add_option("--spot", m.spot, "spot price");
    app.add_option("--rate", m.rate, "risk-free deposit rate r");
    app.add_option("--div", m.div, "continuous dividend yield q");
    app.add_option("--vol", m.vol, "lognormal volatility");
    auto* br = app.add_option("--borrow-rate", m.borrow_rate, "unsecured borrowing rate r_b");
    auto* bs = app.add_option("--borrow-spread", m.borrow_spread, "r_b - r");
    br->excludes(bs);
    auto* rr = app.add_option("--repo-rate", m.repo_rate, "repo rate");
    auto* rs = app.add_option("--repo-spread", m.repo_spread, "repo rate - r");
    rr->excludes(rs);
    auto* lr = app.add_option("--rebate-rate", m.rebate_rate, "sec lending rebate rate");
    auto* ls = app.add_option("--rebate-spread", m.rebate_spread, "rebate rate - r (<= 0)");
    lr->excludes(ls);
    app.add_option("--repo-haircut", m.repo_haircut, "repo haircut in [0,1)");
    app.add_option("--sec-haircut", m.sec_haircut, "sec lending haircut in [0,1)");
    app.add_flag("--no-repo", m.no_repo, "finance the hedge entirely unsecured");
}

inline void add_grid_flags(CLI::App& app, GridArgs& g) {
    app.add_option("--config", g.config_file, "key=value file; keys are flag names without dashes");
    app.add_option("--nodes", g.nodes, "stock grid nodes");
    app.add_option("--dt", g.dt, "time step in years");
    app.add_option("--rannacher", g.rannacher, "implicit start-up steps (0 = plain Crank-Nicolson)");
}

inline void add_output_flags(CLI::App& app, OutputArgs& o, const std::string& default_format) {
    o.format = default_format;
    app.add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--output", o.output, "write to this file instead of stdout");
}

[[nodiscard]] inline FundingConfig funding_from(const MarketArgs& m) {
    FundingConfig c;
    c.r = m.rate;
    c.q = m.div;
    c.sigma = m.vol;
    c.r_b = m.borrow_rate ? *m.borrow_rate : m.rate + m.borrow_spread.value_or(0.0);
    c.repo_rate = m.repo_rate ? *m.repo_rate : m.rate + m.repo_spread.value_or(0.0);
    c.rebate_rate = m.rebate_rate ? *m.rebate_rate : m.rate + m.rebate_spread.value_or(0.0);
    c.repo_haircut = m.repo_haircut;
    c.sec_haircut = m.sec_haircut;
    c.no_repo = m.no_repo;
    return c;
}

// Mirrors validate()'s check order so the message can name the flag.
[[nodiscard]] inline std::string offending_flag(const FundingConfig& c) {
    if (c.r_b < c.r) return "--borrow-rate/--borrow-spread";
    if (c.repo_rate < c.r) return "--repo-rate/--repo-spread";
    if (c.rebate_rate > c.r) return "--rebate-rate/--rebate-spread";
    if (c.repo_haircut < 0.0 || c.repo_haircut >= 1.0) return "--repo-haircut";
    if (c.sec_haircut < 0.0 || c.sec_haircut >= 1.0) return "--sec-haircut";
    if (!(c.sigma > 0.0)) return "--vol";
    return "--rate";
}

[[nodiscard]] inline FundingConfig checked_funding(const MarketArgs& m) {
    auto c = funding_from(m);
    if (auto err = validate(c)) throw FvaError(err->code(), err->detail() + " [" + offending_flag(c) + "]");
    if (!(m.spot > 0.0)) throw FvaError(ErrorCode::InvalidInput, "spot must be positive [--spot]");
    return c;
}

[[nodiscard]] inline Portfolio portfolio_from(const MarketArgs& m) {
    if (!m.portfolio_file.empty()) {
        std::ifstream in(m.portfolio_file);
        if (!in) throw FvaError(ErrorCode::InvalidInput, "cannot read " + m.portfolio_file + " [--portfolio]");
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        return portfolio_from_json(std::string_view(text));
    }
    return Portfolio::single(parse_kind(m.kind), m.strike, m.expiry, 1.0, parse_style(m.style));
}

[[nodiscard]] inline SolverParams solver_params(const GridArgs& g) {
    SolverParams p;
    p.rannacher_steps = g.rannacher;
    return p;
}

[[nodiscard]] inline std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline void csv_header(std::ostream& out, std::string_view command, std::string_view columns) {
    out << "# fva-pricer v1 " << command << '\n' << columns << '\n';
}

// ---------------------------------------------------------------- price

struct PriceArgs {
    MarketArgs market;
    GridArgs grid;
    OutputArgs out;
    std::string side = "bid";
    std::string engine = "pde";
};

inline void cmd_price(const PriceArgs& a, std::ostream& out) {
    const auto config = checked_funding(a.market);
    const auto book = portfolio_from(a.market);
    const Side side = a.side == "ask" ? Side::Ask : a.side == "riskfree" ? Side::RiskFree : Side::Bid;

    double bid = 0.0, ask = 0.0, mid = 0.0;
    BsQuote chosen;
    if (a.engine == "analytic") {
        if (book.legs().size() != 1 || book.style() != ExerciseStyle::European || book.legs()[0].quantity != 1.0)
            throw FvaError(ErrorCode::InvalidInput, "analytic engine prices one long-quantity European option [--engine]");
        const auto& leg = book.legs()[0];
        const auto ref = bs_price(leg.kind, a.market.spot, leg.strike, book.expiry(), config.r, config.q, config.sigma);
        const auto lng = long_position_price(leg.kind, a.market.spot, leg.strike, book.expiry(), config);
        if (config.repo_haircut != 0.0 || config.sec_haircut != 0.0 || config.no_repo)
            throw FvaError(ErrorCode::HaircutNotZero, "no closed-form ask with haircuts; use --engine pde [--engine]");
        const auto sp = zero_haircut_spread(leg.kind, a.market.spot, leg.strike, book.expiry(), config);
        const double ask_carry = (leg.kind == OptionKind::Call ? config.repo_rate : config.rebate_rate) - config.q;
        const auto ask_q =
            detail::black(leg.kind, a.market.spot, leg.strike, book.expiry(), config.r, ask_carry, config.sigma);
        bid = lng.price;
        ask = sp.ask;
        mid = ref.price;
        chosen = side == Side::Bid ? lng : side == Side::Ask ? ask_q : ref;
    } else if (a.engine == "pde") {
        const auto grid = make_grid(book, a.market.spot, config.sigma, a.grid.nodes, a.grid.dt);
        const auto params = solver_params(a.grid);
        auto jb = std::async(std::launch::async, [&] { return price_book(book, Side::Bid, config, a.market.spot, grid, params); });
        auto ja = std::async(std::launch::async, [&] { return price_book(book, Side::Ask, config, a.market.spot, grid, params); });
        const auto rf = price_book(book, Side::RiskFree, config, a.market.spot, grid, params);
        const auto rb = jb.get();
        const auto ra = ja.get();
        bid = rb.price;
        ask = ra.price;
        mid = rf.price;
        const auto& r = side == Side::Bid ? rb : side == Side::Ask ? ra : rf;
        const double quote_sign = side == Side::Ask ? -1.0 : 1.0;
        chosen = {r.price, quote_sign * r.delta, quote_sign * r.gamma};
    } else {
        throw FvaError(ErrorCode::InvalidInput, "engine must be pde or analytic [--engine]");
    }

    const double fb = fva(Side::Bid, bid, mid);
    const double fa = fva(Side::Ask, ask, mid);
    if (a.out.format == "csv") {
        csv_header(out, "price", "side,price,delta,gamma,bid,ask,mid_reference,f_b,f_a");
        out << a.side << ',' << num(chosen.price) << ',' << num(chosen.delta) << ',' << num(chosen.gamma) << ','
            << num(bid) << ',' << num(ask) << ',' << num(mid) << ',' << num(fb) << ',' << num(fa) << '\n';
    } else {
        nlohmann::ordered_json j{{"command", "price"}, {"engine", a.engine},  {"side", a.side},
                                 {"price", chosen.price}, {"delta", chosen.delta}, {"gamma", chosen.gamma},
                                 {"bid", bid},           {"ask", ask},          {"mid_reference", mid},
                                 {"f_b", fb},            {"f_a", fa}};
        out << j.dump(2) << '\n';
    }
}

// ---------------------------------------------------------------- fva-curve

struct FvaCurveArgs {
    MarketArgs market;
    GridArgs grid;
    OutputArgs out;
    std::string engine = "analytic";
    double spread_min = 0.0;
    double spread_max = 0.04;
    double spread_step = 0.0025;
};

struct FinancingCase {
    const char* name;
    bool no_repo;
    double haircut;
    double repo_spread;
};

inline constexpr FinancingCase kFvaCases[] = {
    {"no_repo", true, 0.0, 0.0},
    {"h0_repo50", false, 0.0, 0.005},
    {"h35_repo50", false, 0.35, 0.005},
    {"h35_repo150", false, 0.35, 0.015},
};

/// Bid-side FVA in percent of V* for one financing case at one spread.
[[nodiscard]] inline double fva_percent(const Portfolio& book, const MarketArgs& m, const FinancingCase& fc,
                                        double spread, const std::string& engine, const GridArgs& g) {
    FundingConfig c = FundingConfig::risk_free(m.rate, m.div, m.vol);
    c.r_b = m.rate + spread;
    c.no_repo = fc.no_repo;
    c.repo_haircut = fc.haircut;
    c.sec_haircut = fc.haircut;
    // Secured financing dearer than unsecured would not be used: the repo
    // spread is capped at the unsecured spread.
    const double repo_spread = std::min(fc.repo_spread, spread);
    c.repo_rate = m.rate + repo_spread;
    c.rebate_rate = m.rate - repo_spread;
    require_valid(c);
    const auto& leg = book.legs()[0];
    double v_star = 0.0, v_bid = 0.0;
    if (engine == "analytic") {
        v_star = bs_price(leg.kind, m.spot, leg.strike, book.expiry(), c.r, c.q, c.sigma).price;
        v_bid = long_position_price(leg.kind, m.spot, leg.strike, book.expiry(), c).price;
    } else {
        const auto grid = make_grid(book, m.spot, c.sigma, g.nodes, g.dt);
        const auto params = solver_params(g);
        v_star = solve(book, Side::RiskFree, c, m.spot, grid, params).price;
        v_bid = solve(book, Side::Bid, c, m.spot, grid, params).price;
    }
    return 100.0 * fva(Side::Bid, v_bid, v_star) / v_star;
}

inline void cmd_fva_curve(const FvaCurveArgs& a, std::ostream& out) {
    if (!(a.spread_step > 0.0) || a.spread_max < a.spread_min || a.spread_min < 0.0)
        throw FvaError(ErrorCode::InvalidInput, "bad spread sweep [--spread-min/--spread-max/--spread-step]");
    if (a.engine != "analytic" && a.engine != "pde")
        throw FvaError(ErrorCode::InvalidInput, "engine must be pde or analytic [--engine]");
    const auto book = Portfolio::single(parse_kind(a.market.kind), a.market.strike, a.market.expiry);
    if (!(a.market.spot > 0.0) || !(a.market.vol > 0.0))
        throw FvaError(ErrorCode::InvalidInput, "spot and vol must be positive [--spot/--vol]");

    const auto count = static_cast<std::size_t>(std::floor((a.spread_max - a.spread_min) / a.spread_step + 1e-9)) + 1;
    std::vector<double> spreads(count);
    for (std::size_t i = 0; i < count; ++i) spreads[i] = a.spread_min + a.spread_step * static_cast<double>(i);

    std::vector<std::future<std::vector<double>>> rows;
    for (double sp : spreads) {
        rows.push_back(std::async(std::launch::async, [&, sp] {
            std::vector<double> r;
            for (const auto& fc : kFvaCases) r.push_back(fva_percent(book, a.market, fc, sp, a.engine, a.grid));
            return r;
        }));
    }

    if (a.out.format == "csv") {
        csv_header(out, "fva-curve", "spread,no_repo,h0_repo50,h35_repo50,h35_repo150");
        for (std::size_t i = 0; i < count; ++i) {
            const auto r = rows[i].get();
            out << num(spreads[i]);
            for (double v : r) out << ',' << num(v);
            out << '\n';
        }
    } else {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < count; ++i) {
            const auto r = rows[i].get();
            nlohmann::ordered_json row{{"spread", spreads[i]}};
            for (std::size_t c = 0; c < r.size(); ++c) row[kFvaCases[c].name] = r[c];
            arr.push_back(row);
        }
        out << nlohmann::ordered_json{{"command", "fva-curve"}, {"rows", arr}}.dump(2) << '\n';
    }
}

// ---------------------------------------------------------------- netting

struct NettingArgs {
    MarketArgs market;
    GridArgs grid;
    OutputArgs out;
    std::string strategy = "all";
    std::vector<double> strikes;
    std::vector<double> expiries{0.25, 0.5, 1.0, 2.0, 3.0};
};

[[nodiscard]] inline std::vector<double> default_strikes(Strategy s) {
    switch (s) {
    case Strategy::Bull:
    case Strategy::Strangle: return {95.0, 105.0};
    case Strategy::Straddle:
    case Strategy::Strip: return {100.0};
    }
    return {};
}

inline void cmd_netting(const NettingArgs& a, std::ostream& out) {
    const auto config = checked_funding(a.market);
    std::vector<Strategy> strategies;
    if (a.strategy == "all")
        strategies = {Strategy::Bull, Strategy::Straddle, Strategy::Strangle, Strategy::Strip};
    else
        strategies = {parse_strategy(a.strategy)};
    if (!a.strikes.empty() && strategies.size() != 1)
        throw FvaError(ErrorCode::BadStrikes, "--strikes needs a single --strategy [--strikes]");
    if (a.expiries.empty()) throw FvaError(ErrorCode::InvalidInput, "no expiries [--expiries]");

    struct Row {
        Strategy strategy;
        double expiry;
        std::future<NettingReport> report;
    };
    std::vector<Row> rows;
    const auto params = solver_params(a.grid);
    for (auto s : strategies) {
        const auto strikes = a.strikes.empty() ? default_strikes(s) : a.strikes;
        for (double t : a.expiries) {
            const auto book = build_strategy(s, strikes, t);
            rows.push_back({s, t, std::async(std::launch::async, [&, book] {
                                const auto grid = make_grid(book, a.market.spot, config.sigma, a.grid.nodes, a.grid.dt);
                                return netting_report(book, config, a.market.spot, grid, params);
                            })});
        }
    }

    if (a.out.format == "csv") {
        csv_header(out, "netting",
                   "strategy,T,netted_bid,netted_ask,netted_spread,synthetic_bid,synthetic_ask,synthetic_spread,"
                   "netting_effect");
        for (auto& row : rows) {
            const auto r = row.report.get();
            out << to_string(row.strategy) << ',' << num(row.expiry) << ',' << num(r.netted_bid) << ','
                << num(r.netted_ask) << ',' << num(r.netted_spread) << ',' << num(r.synthetic_bid) << ','
                << num(r.synthetic_ask) << ',' << num(r.synthetic_spread) << ',' << num(r.netting_effect) << '\n';
        }
    } else {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (auto& row : rows) {
            const auto r = row.report.get();
            arr.push_back({{"strategy", to_string(row.strategy)},
                           {"T", row.expiry},
                           {"netted_bid", r.netted_bid},
                           {"netted_ask", r.netted_ask},
                           {"netted_spread", r.netted_spread},
                           {"synthetic_bid", r.synthetic_bid},
                           {"synthetic_ask", r.synthetic_ask},
                           {"synthetic_spread", r.synthetic_spread},
                           {"netting_effect", r.netting_effect}});
        }
        out << nlohmann::ordered_json{{"command", "netting"}, {"rows", arr}}.dump(2) << '\n';
    }
}

// ---------------------------------------------------------------- table1

struct Table1Args {
    MarketArgs market;
    GridArgs grid;
    OutputArgs out;
};

struct Table1Line {
    OptionKind kind;
    BsQuote analytic;
    BsQuote fd;
    [[nodiscard]] bool within() const {
        return std::abs(fd.price - analytic.price) <= kTable1PriceTol &&
               std::abs(fd.delta - analytic.delta) <= kTable1DeltaTol &&
               std::abs(fd.gamma - analytic.gamma) <= kTable1GammaTol;
    }
};

[[nodiscard]] inline Table1Line table1_line(OptionKind kind, const MarketArgs& m, const GridArgs& g) {
    const auto config = FundingConfig::risk_free(m.rate, m.div, m.vol);
    const auto book = Portfolio::single(kind, m.strike, m.expiry);
    const auto grid = make_grid(book, m.spot, m.vol, g.nodes, g.dt);
    const auto r = solve(book, Side::RiskFree, config, m.spot, grid, solver_params(g));
    return {kind, bs_price(kind, m.spot, m.strike, m.expiry, m.rate, m.div, m.vol), {r.price, r.delta, r.gamma}};
}

/// Returns the exit code: 0 when every difference is inside its bound.
inline int cmd_table1(const Table1Args& a, std::ostream& out) {
    if (!(a.market.vol > 0.0)) throw FvaError(ErrorCode::NonPositiveVol, "volatility must be positive [--vol]");
    std::vector<Table1Line> lines;
    for (auto kind : {OptionKind::Call, OptionKind::Put}) lines.push_back(table1_line(kind, a.market, a.grid));
    bool ok = true;
    for (const auto& l : lines) ok = ok && l.within();

    if (a.out.format == "csv") {
        csv_header(out, "table1",
                   "kind,analytic_price,fd_price,abs_diff_price,analytic_delta,fd_delta,abs_diff_delta,"
                   "analytic_gamma,fd_gamma,abs_diff_gamma,within_bounds");
        for (const auto& l : lines) {
            out << to_string(l.kind) << ',' << num(l.analytic.price) << ',' << num(l.fd.price) << ','
                << num(std::abs(l.fd.price - l.analytic.price)) << ',' << num(l.analytic.delta) << ','
                << num(l.fd.delta) << ',' << num(std::abs(l.fd.delta - l.analytic.delta)) << ','
                << num(l.analytic.gamma) << ',' << num(l.fd.gamma) << ',' << num(std::abs(l.fd.gamma - l.analytic.gamma))
                << ',' << (l.within() ? "true" : "false") << '\n';
        }
    } else {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& l : lines) {
            arr.push_back({{"kind", to_string(l.kind)},
                           {"analytic", {{"price", l.analytic.price}, {"delta", l.analytic.delta}, {"gamma", l.analytic.gamma}}},
                           {"fd", {{"price", l.fd.price}, {"delta", l.fd.delta}, {"gamma", l.fd.gamma}}},
                           {"abs_diff",
                            {{"price", std::abs(l.fd.price - l.analytic.price)},
                             {"delta", std::abs(l.fd.delta - l.analytic.delta)},
                             {"gamma", std::abs(l.fd.gamma - l.analytic.gamma)}}},
                           {"within_bounds", l.within()}});
        }
        out << nlohmann::ordered_json{{"command", "table1"},
                                      {"nodes", a.grid.nodes},
                                      {"dt", a.grid.dt},
                                      {"bounds", {{"price", kTable1PriceTol}, {"delta", kTable1DeltaTol}, {"gamma", kTable1GammaTol}}},
                                      {"rows", arr},
                                      {"pass", ok}}
                   .dump(2)
            << '\n';
    }
    return ok ? kExitOk : kExitTolerance;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    MarketArgs market;
    GridArgs grid;
    OutputArgs out;
    std::string side = "riskfree";
    std::string oracle = "auto";
    std::size_t paths = 10000;
    std::size_t steps = 250;
    double mu = 0.0;
    std::uint64_t seed = 0;
};

inline void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const auto config = checked_funding(a.market);
    const auto book = portfolio_from(a.market);
    const Side side = a.side == "ask" ? Side::Ask : a.side == "riskfree" ? Side::RiskFree : Side::Bid;
    const FundingConfig effective = side == Side::RiskFree ? config.degenerate() : config;

    PricingOracle oracle;
    if (a.oracle == "analytic") {
        oracle = analytic_oracle(book, side, effective);
    } else {
        // The surface step is kept at or below the hedging step.
        const double dt = std::min(a.grid.dt, book.expiry() / static_cast<double>(std::max<std::size_t>(a.steps, 1)));
        const auto grid = make_grid(book, a.market.spot, config.sigma, a.grid.nodes, dt);
        oracle = a.oracle == "pde" ? pde_oracle(book, side, effective, a.market.spot, grid, solver_params(a.grid))
                                   : default_oracle(book, side, effective, a.market.spot, grid);
    }
    const HedgeRun run{a.paths, a.steps, a.mu, a.seed, a.market.spot};
    const auto s = simulate_hedge(book, side, config, run, oracle);

    if (a.out.format == "csv") {
        csv_header(out, "simulate", "mean,std,max_abs,mean_abs,std_error,n_paths,n_steps,seed");
        out << num(s.mean) << ',' << num(s.std) << ',' << num(s.max_abs) << ',' << num(s.mean_abs) << ','
            << num(s.std_error) << ',' << s.n_paths << ',' << s.n_steps << ',' << s.seed << '\n';
    } else {
        out << nlohmann::ordered_json{{"mean", s.mean},           {"std", s.std},         {"max_abs", s.max_abs},
                                      {"mean_abs", s.mean_abs},   {"std_error", s.std_error},
                                      {"n_paths", s.n_paths},     {"n_steps", s.n_steps}, {"seed", s.seed}}
                   .dump(2)
            << '\n';
    }
}

// ---------------------------------------------------------------- table2 demo

struct Table2Args {
    MarketArgs market;
    GridArgs grid;
    OutputArgs out;
    std::string fixture = "samples/long_dated_chain.csv";
    std::optional<double> spot;
};

struct FixtureRow {
    double strike, mid_call, mid_put, call_spread, put_spread, ref_call_spread, ref_put_spread;
};

[[nodiscard]] inline std::vector<FixtureRow> read_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FvaError(ErrorCode::InvalidInput, "cannot read " + path + " [--fixture]");
    std::vector<FixtureRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("strike", 0) == 0) continue;
        FixtureRow r{};
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.strike, &r.mid_call, &r.mid_put,
                        &r.call_spread, &r.put_spread, &r.ref_call_spread, &r.ref_put_spread) != 7)
            throw FvaError(ErrorCode::InvalidInput, "malformed fixture line: " + line);
        rows.push_back(r);
    }
    if (rows.empty()) throw FvaError(ErrorCode::InvalidInput, "empty fixture [--fixture]");
    return rows;
}

/// Implies a vol per strike from the mid prices with the risk-free engine,
/// then reports the funding-induced call and put spreads next to the quoted
/// market spreads. Illustration only: the market inputs are incomplete.
inline void cmd_table2(const Table2Args& a, std::ostream& out) {
    const auto config = checked_funding(a.market);
    const auto rows = read_fixture(a.fixture);
    const double t = a.market.expiry;
    double spot = 0.0;
    if (a.spot) {
        spot = *a.spot;
    } else {
        // Parity with the given rate and dividend yield: C - P = S e^{-qT} - K e^{-rT}.
        for (const auto& r : rows) spot += r.mid_call - r.mid_put + r.strike * std::exp(-config.r * t);
        spot = spot / static_cast<double>(rows.size()) * std::exp(config.q * t);
    }
    const auto params = solver_params(a.grid);

    struct Out {
        FixtureRow row;
        double call_vol, put_vol, call_spread, put_spread;
    };
    std::vector<std::future<Out>> jobs;
    for (const auto& r : rows) {
        jobs.push_back(std::async(std::launch::async, [&, r] {
            Out o{r, 0, 0, 0, 0};
            for (auto kind : {OptionKind::Call, OptionKind::Put}) {
                const double mid = kind == OptionKind::Call ? r.mid_call : r.mid_put;
                const double vol = implied_vol(kind, spot, r.strike, t, config.r, config.q, mid);
                FundingConfig c = config;
                c.sigma = vol;
                const auto book = Portfolio::single(kind, r.strike, t);
                const auto grid = make_grid(book, spot, vol, a.grid.nodes, a.grid.dt);
                const double spread = solve(book, Side::Ask, c, spot, grid, params).price -
                                      solve(book, Side::Bid, c, spot, grid, params).price;
                (kind == OptionKind::Call ? o.call_vol : o.put_vol) = vol;
                (kind == OptionKind::Call ? o.call_spread : o.put_spread) = spread;
            }
            return o;
        }));
    }

    csv_header(out, "table2",
               "strike,mid_call,mid_put,implied_vol_call,implied_vol_put,market_call_spread,market_put_spread,"
               "calc_call_spread,calc_put_spread,reference_call_spread,reference_put_spread");
    out << "# spot " << num(spot) << '\n';
    for (auto& j : jobs) {
        const auto o = j.get();
        out << num(o.row.strike) << ',' << num(o.row.mid_call) << ',' << num(o.row.mid_put) << ',' << num(o.call_vol)
            << ',' << num(o.put_vol) << ',' << num(o.row.call_spread) << ',' << num(o.row.put_spread) << ','
            << num(o.call_spread) << ',' << num(o.put_spread) << ',' << num(o.row.ref_call_spread) << ','
            << num(o.row.ref_put_spread) << '\n';
    }
}

// ---------------------------------------------------------------- dispatch

[[nodiscard]] inline int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::PsorDiverged: return kExitSolver;
    default: return kExitInvalid;
    }
}

inline void emit(const OutputArgs& o, std::ostream& out, const std::string& text) {
    if (o.output.empty()) {
        out << text;
        return;
    }
    std::ofstream f(o.output, std::ios::binary);
    if (!f) throw FvaError(ErrorCode::InvalidInput, "cannot write " + o.output + " [--output]");
    f << text;
}

[[nodiscard]] inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

/// Replaces `--config FILE` with the file's key=value pairs as flags.
/// Flags given explicitly on the command line win over the file.
[[nodiscard]] inline std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path + " [--config]");
    const auto given = [&](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line without '=': " + line + " [--config]");
        const std::string flag = "--" + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (given(flag)) continue;
        if (value == "true") {
            args.push_back(flag);
        } else if (value != "false") {
            args.push_back(flag);
            args.push_back(value);
        }
    }
    return args;
}

/// Parses argv and runs one command. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Option pricing with funding costs: bid/ask, FVA, netting, replication"};
    app.name("fva-pricer");
    app.require_subcommand(1);

    PriceArgs price;
    auto* sc_price = app.add_subcommand("price", "bid, ask, reference price and FVA of one option or a book");
    add_market_flags(*sc_price, price.market);
    add_grid_flags(*sc_price, price.grid);
    add_output_flags(*sc_price, price.out, "json");
    sc_price->add_option("--side", price.side, "quote greeks for bid, ask or riskfree")
        ->check(CLI::IsMember({"bid", "ask", "riskfree"}));
    sc_price->add_option("--engine", price.engine, "pde or analytic")->check(CLI::IsMember({"pde", "analytic"}));

    FvaCurveArgs curve;
    auto* sc_curve = app.add_subcommand("fva-curve", "bid FVA percent against the unsecured spread");
    add_market_flags(*sc_curve, curve.market);
    add_grid_flags(*sc_curve, curve.grid);
    add_output_flags(*sc_curve, curve.out, "csv");
    sc_curve->add_option("--engine", curve.engine, "analytic or pde")->check(CLI::IsMember({"pde", "analytic"}));
    sc_curve->add_option("--spread-min", curve.spread_min, "first r_b - r");
    sc_curve->add_option("--spread-max", curve.spread_max, "last r_b - r");
    sc_curve->add_option("--spread-step", curve.spread_step, "sweep step");

    NettingArgs netting;
    auto* sc_net = app.add_subcommand("netting", "netted vs synthetic spreads across expiries");
    add_market_flags(*sc_net, netting.market, false);
    add_grid_flags(*sc_net, netting.grid);
    add_output_flags(*sc_net, netting.out, "csv");
    sc_net->add_option("--strategy", netting.strategy, "bull, straddle, strangle, strip or all")
        ->check(CLI::IsMember({"bull", "straddle", "strangle", "strip", "all"}));
    sc_net->add_option("--strikes", netting.strikes, "strikes, low to high")->delimiter(',');
    sc_net->add_option("--expiries", netting.expiries, "expiries in years")->delimiter(',');

    Table1Args table1;
    auto* sc_t1 = app.add_subcommand("table1", "finite-difference vs closed-form calibration check");
    add_market_flags(*sc_t1, table1.market);
    add_grid_flags(*sc_t1, table1.grid);
    add_output_flags(*sc_t1, table1.out, "json");

    SimulateArgs sim;
    auto* sc_sim = app.add_subcommand("simulate", "Monte Carlo check of the self-financing hedge");
    add_market_flags(*sc_sim, sim.market);
    add_grid_flags(*sc_sim, sim.grid);
    add_output_flags(*sc_sim, sim.out, "json");
    sc_sim->add_option("--side", sim.side, "bid, ask or riskfree")->check(CLI::IsMember({"bid", "ask", "riskfree"}));
    sc_sim->add_option("--oracle", sim.oracle, "auto, analytic or pde")->check(CLI::IsMember({"auto", "analytic", "pde"}));
    sc_sim->add_option("--paths", sim.paths, "number of paths");
    sc_sim->add_option("--steps", sim.steps, "hedge rebalances");
    sc_sim->add_option("--mu", sim.mu, "real-world drift");
    sc_sim->add_option("--seed", sim.seed, "random seed")->required();

    Table2Args table2;
    table2.market.expiry = 535.0 / 365.0;
    table2.market.rate = 0.0;
    table2.market.borrow_spread = 0.03;
    table2.market.repo_spread = 0.007;
    table2.market.rebate_spread = -0.007;
    table2.market.repo_haircut = 0.25;
    table2.market.sec_haircut = 0.25;
    auto* sc_t2 = app.add_subcommand("table2", "demo: funding spreads on a long-dated option chain fixture");
    add_market_flags(*sc_t2, table2.market, false);
    sc_t2->add_option("--expiry", table2.market.expiry, "expiry in years");
    add_grid_flags(*sc_t2, table2.grid);
    sc_t2->add_option("--fixture", table2.fixture, "fixture CSV");
    sc_t2->add_option("--spot-override", table2.spot, "spot (default: implied from put-call parity)");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
        app.parse(args);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }

    try {
        std::ostringstream buf;
        int code = kExitOk;
        const OutputArgs* o = nullptr;
        if (sc_price->parsed()) {
            cmd_price(price, buf);
            o = &price.out;
        } else if (sc_curve->parsed()) {
            cmd_fva_curve(curve, buf);
            o = &curve.out;
        } else if (sc_net->parsed()) {
            cmd_netting(netting, buf);
            o = &netting.out;
        } else if (sc_t1->parsed()) {
            code = cmd_table1(table1, buf);
            o = &table1.out;
        } else if (sc_sim->parsed()) {
            cmd_simulate(sim, buf);
            o = &sim.out;
        } else if (sc_t2->parsed()) {
            cmd_table2(table2, buf);
            o = &table2.out;
        }
        emit(*o, out, buf.str());
        return code;
    } catch (const FvaError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    }
}

}  // namespace fva::cli
