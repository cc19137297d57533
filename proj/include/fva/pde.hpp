#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fva/errors.hpp"
#include "fva/funding.hpp"
#include "fva/market.hpp"
#include "fva/tridiagonal.hpp"

namespace fva {

/// Uniform stock grid on [0, s_max] plus the time step count.
struct PdeGrid {
    std::vector<double> s_nodes;
    double dt = 0.0;
    std::size_t n_steps = 0;

    [[nodiscard]] std::size_t size() const noexcept { return s_nodes.size(); }
    [[nodiscard]] double ds() const noexcept { return s_nodes[1] - s_nodes[0]; }
    [[nodiscard]] double s_max() const noexcept { return s_nodes.back(); }

    /// `nodes` points from 0 to s_max; the step is shrunk so that n_steps * dt == expiry.
    [[nodiscard]] static PdeGrid uniform(double s_max, std::size_t nodes, double expiry, double dt) {
        if (nodes < 3) throw FvaError(ErrorCode::GridTooCoarse, "grid needs at least 3 nodes");
        if (!(s_max > 0.0) || !(dt > 0.0) || !(expiry > 0.0))
            throw FvaError(ErrorCode::InvalidInput, "s_max, dt and expiry must be positive");
        PdeGrid g;
        g.s_nodes.resize(nodes);
        const double ds = s_max / static_cast<double>(nodes - 1);
        for (std::size_t i = 0; i < nodes; ++i) g.s_nodes[i] = ds * static_cast<double>(i);
        g.n_steps = static_cast<std::size_t>(std::max(1.0, std::ceil(expiry / dt - 1e-9)));
        g.dt = expiry / static_cast<double>(g.n_steps);
        return g;
    }
};

[[nodiscard]] inline double min_grid_upper(const Portfolio& p, double spot, double sigma) {
    return std::max(4.0 * p.max_strike(), spot * std::exp(4.0 * sigma * std::sqrt(p.expiry())));
}

/// Grid with `nodes` points whose step divides the spot, and the strikes too
/// when a step within a factor two of the finest admissible one allows it.
[[nodiscard]] inline PdeGrid make_grid(const Portfolio& p, double spot, double sigma, std::size_t nodes = 2000,
                                       double dt = 0.02) {
    if (!(spot > 0.0)) throw FvaError(ErrorCode::InvalidInput, "spot must be positive");
    if (nodes < 3) throw FvaError(ErrorCode::GridTooCoarse, "grid needs at least 3 nodes");
    const double intervals = static_cast<double>(nodes - 1);
    const double upper = min_grid_upper(p, spot, sigma);
    const auto max_cells = static_cast<long>(std::floor(spot * intervals / upper));
    if (max_cells < 1) throw FvaError(ErrorCode::GridTooCoarse, "too few nodes to place the spot inside the grid");

    const auto on_nodes = [&](long cells) {
        const double ds = spot / static_cast<double>(cells);
        for (const auto& leg : p.legs()) {
            const double k = leg.strike / ds;
            if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) return false;
        }
        return true;
    };
    long cells = max_cells;
    for (long c = max_cells; c >= std::max(1L, max_cells / 2); --c) {
        if (on_nodes(c)) {
            cells = c;
            break;
        }
    }
    const double ds = spot / static_cast<double>(cells);
    return PdeGrid::uniform(ds * intervals, nodes, p.expiry(), dt);
}

struct SolverParams {
    std::optional<double> funding_iter_tol;  // defaults to 1e-10 * K_max
    int funding_max_iters = 50;
    double psor_omega = 1.2;
    double psor_tol = 1e-8;
    int psor_max_iters = 2000;
    double theta = 0.5;
    int rannacher_steps = 1;  // leading CN steps replaced by two implicit half steps
    bool keep_surface = false;

    [[nodiscard]] double funding_tol_for(const Portfolio& p) const {
        return funding_iter_tol.value_or(1e-10 * p.max_strike());
    }
};

struct BoundaryPoint {
    double t = 0.0;
    double s = 0.0;
};

struct SolverDiagnostics {
    std::size_t funding_iterations = 0;
    int max_funding_iterations = 0;
    std::size_t psor_sweeps = 0;
    std::size_t upwind_rows = 0;
    std::size_t boundary_fallbacks = 0;
};

struct PricingResult {
    double value = 0.0;  // signed position value U(S0, 0)
    double price = 0.0;  // quote: value for bid/reference, -value for ask
    double delta = 0.0;  // dU/dS at S0
    double gamma = 0.0;
    std::vector<BoundaryPoint> funding_boundary;
    std::vector<double> profile;
    std::vector<double> surface_times;               // filled when keep_surface
    std::vector<std::vector<double>> surface;        // surface[k] is U at surface_times[k]
    SolverDiagnostics diagnostics;
};

/// Coefficients of the localized linear operator at one row: the stock
/// drift seen by U_S (funding included) and the discount rate.
struct LocalCoefficients {
    double drift = 0.0;
    double reaction = 0.0;
    double need = 0.0;      // U - h S U_S before the (.)^+ cut
    double exposure = 0.0;  // S U_S
    bool funded = false;    // N > 0
};

/// Operator L and mass matrix M of the semi-discrete system M U_tau = L U.
struct OperatorRows {
    Tridiagonal<double> op;
    Tridiagonal<double> mass;

    explicit OperatorRows(std::size_t n) : op(n), mass(n) {}
};

/// Zero-gamma closure at both ends. Row 0 and row n-1 carry the PDE at the
/// half node between the boundary node and its neighbour, with U_SS = 0 and a
/// one-sided first derivative, so each row couples two unknowns.
inline void apply_boundary(OperatorRows& rows, const LocalCoefficients& lower, const LocalCoefficients& upper,
                           std::span<const double> s_nodes) {
    const std::size_t n = s_nodes.size();
    const double ds = s_nodes[1] - s_nodes[0];

    const double s_lo = 0.5 * (s_nodes[0] + s_nodes[1]);
    const double conv_lo = lower.drift * s_lo / ds;
    rows.op.diag[0] = -conv_lo - 0.5 * lower.reaction;
    rows.op.sup[0] = conv_lo - 0.5 * lower.reaction;
    rows.mass.diag[0] = 0.5;
    rows.mass.sup[0] = 0.5;

    const double s_hi = 0.5 * (s_nodes[n - 2] + s_nodes[n - 1]);
    const double conv_hi = upper.drift * s_hi / ds;
    rows.op.sub[n - 1] = -conv_hi - 0.5 * upper.reaction;
    rows.op.diag[n - 1] = conv_hi - 0.5 * upper.reaction;
    rows.mass.sub[n - 1] = 0.5;
    rows.mass.diag[n - 1] = 0.5;
}

namespace detail {

inline LocalCoefficients localize(double value, double slope, double s, const FundingConfig& c) {
    LocalCoefficients lc;
    const auto sel = select_financing(sign_of(hedge_holding(slope)), c);
    lc.exposure = s * slope;
    lc.need = value - sel.h_signed * lc.exposure;
    lc.funded = c.r_b > c.r && lc.need > 0.0;
    const double spread = lc.funded ? c.r_b - c.r : 0.0;
    lc.drift = sel.r_s - c.q + spread * sel.h_signed;
    lc.reaction = c.r + spread;
    return lc;
}

// Row i of the localization pattern uses the same stencil points as row i of
// the operator: half nodes at the two ends, central differences inside.
inline void localize_all(std::span<const double> u, std::span<const double> s, const FundingConfig& c,
                         std::vector<LocalCoefficients>& out) {
    const std::size_t n = u.size();
    const double ds = s[1] - s[0];
    out.resize(n);
    out[0] = localize(0.5 * (u[0] + u[1]), (u[1] - u[0]) / ds, 0.5 * (s[0] + s[1]), c);
    for (std::size_t i = 1; i + 1 < n; ++i)
        out[i] = localize(u[i], (u[i + 1] - u[i - 1]) / (2.0 * ds), s[i], c);
    out[n - 1] = localize(0.5 * (u[n - 2] + u[n - 1]), (u[n - 1] - u[n - 2]) / ds, 0.5 * (s[n - 2] + s[n - 1]), c);
}

inline std::size_t assemble(std::span<const LocalCoefficients> coeffs, std::span<const double> s, double sigma,
                            OperatorRows& rows) {
    const std::size_t n = s.size();
    const double ds = s[1] - s[0];
    const double var = sigma * sigma;
    std::size_t upwind = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double si = s[i];
        const double diff = 0.5 * var * si * si / (ds * ds);
        const double mu = coeffs[i].drift;
        double lo = diff;
        double mid = -2.0 * diff - coeffs[i].reaction;
        double hi = diff;
        if (std::abs(mu) * ds > var * si) {
            ++upwind;
            const double conv = mu * si / ds;
            if (mu > 0.0) {
                hi += conv;
                mid -= conv;
            } else {
                lo -= conv;
                mid += conv;
            }
        } else {
            const double conv = 0.5 * mu * si / ds;
            lo -= conv;
            hi += conv;
        }
        rows.op.sub[i] = lo;
        rows.op.diag[i] = mid;
        rows.op.sup[i] = hi;
        rows.mass.diag[i] = 1.0;
    }
    apply_boundary(rows, coeffs[0], coeffs[n - 1], s);
    return upwind;
}

// Pattern comparison ignores rows where a flip cannot move the solution by
// more than the tolerance: need or exposure within tol of zero.
inline bool same_pattern(std::span<const LocalCoefficients> a, std::span<const LocalCoefficients> b, double tol) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].drift == b[i].drift && a[i].reaction == b[i].reaction) continue;
        if (a[i].funded != b[i].funded) {
            if (std::abs(b[i].need) > tol) return false;
        } else if (std::abs(b[i].exposure) > tol) {
            return false;
        }
    }
    return true;
}

class Stepper {
public:
    Stepper(const PdeGrid& grid, const FundingConfig& config, const SolverParams& params, double tol,
            std::optional<std::vector<double>> obstacle, bool upper_obstacle, SolverDiagnostics& diag)
        : grid_(grid),
          config_(config),
          params_(params),
          tol_(tol),
          obstacle_(std::move(obstacle)),
          upper_obstacle_(upper_obstacle),
          diag_(diag),
          rows_(grid.size()),
          system_(grid.size()),
          rhs_(grid.size()),
          next_(grid.size()),
          prev_iter_(grid.size()) {}

    // Advances u by dtau in time-to-expiry; returns the converged pattern.
    const std::vector<LocalCoefficients>& step(std::vector<double>& u, double theta, double dtau) {
        const std::size_t n = u.size();
        const auto s = std::span<const double>(grid_.s_nodes);

        localize_all(u, s, config_, pattern_);
        diag_.upwind_rows += assemble(pattern_, s, config_.sigma, rows_);
        rows_.mass.multiply(u, rhs_);
        if (theta < 1.0) {
            std::vector<double> lu(n);
            rows_.op.multiply(u, lu);
            for (std::size_t i = 0; i < n; ++i) rhs_[i] += (1.0 - theta) * dtau * lu[i];
        }

        prev_iter_ = u;
        for (int iter = 1;; ++iter) {
            if (iter > 1) assemble(pattern_, s, config_.sigma, rows_);
            build_system(theta, dtau);
            solve_system();
            localize_all(next_, s, config_, trial_);

            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next_[i] - prev_iter_[i]));
            const bool stable = same_pattern(pattern_, trial_, tol_);
            prev_iter_ = next_;
            pattern_.swap(trial_);

            ++diag_.funding_iterations;
            if (stable && (iter == 1 || change < tol_)) {
                diag_.max_funding_iterations = std::max(diag_.max_funding_iterations, iter);
                break;
            }
            if (iter >= params_.funding_max_iters)
                throw FvaError(ErrorCode::NoConvergence, "funding boundary iteration did not converge");
        }
        u = next_;
        return pattern_;
    }

private:
    void build_system(double theta, double dtau) {
        const std::size_t n = grid_.size();
        for (std::size_t i = 0; i < n; ++i) {
            system_.sub[i] = rows_.mass.sub[i] - theta * dtau * rows_.op.sub[i];
            system_.diag[i] = rows_.mass.diag[i] - theta * dtau * rows_.op.diag[i];
            system_.sup[i] = rows_.mass.sup[i] - theta * dtau * rows_.op.sup[i];
        }
        // The half-node rows degenerate when the local Courant number hits one;
        // such a row falls back to an explicit update.
        const auto degenerate = [](double d, double off) { return std::abs(d) < 1e-10 * (std::abs(off) + 1.0); };
        if (degenerate(system_.diag[0], system_.sup[0])) {
            system_.diag[0] = rows_.mass.diag[0];
            system_.sup[0] = rows_.mass.sup[0];
            ++diag_.boundary_fallbacks;
        }
        if (degenerate(system_.diag[n - 1], system_.sub[n - 1])) {
            system_.diag[n - 1] = rows_.mass.diag[n - 1];
            system_.sub[n - 1] = rows_.mass.sub[n - 1];
            ++diag_.boundary_fallbacks;
        }
    }

    void project(std::size_t i) {
        const double g = (*obstacle_)[i];
        next_[i] = upper_obstacle_ ? std::min(next_[i], g) : std::max(next_[i], g);
    }

    bool binding(std::size_t i, double x) const {
        const double g = (*obstacle_)[i];
        return upper_obstacle_ ? x >= g : x <= g;
    }

    void solve_system() {
        solve_tridiagonal<double>(system_, rhs_, next_, scratch_);
        if (!obstacle_) return;
        const auto& g = *obstacle_;
        const std::size_t n = grid_.size();

        // The half-node row at s_max loses diagonal dominance once the local
        // Courant number exceeds one, and Gauss-Seidel then amplifies errors
        // near the top. The top block is eliminated exactly instead: free of
        // the constraint (Schur complement onto the row below) or pinned to it.
        const std::size_t block = n >= 16 ? std::min<std::size_t>(32, n / 4) : 0;
        const std::size_t m = n - block;
        bool pinned = block > 0;
        for (std::size_t i = m; i < n; ++i) pinned = pinned && binding(i, next_[i]);

        std::vector<double> reduced_rhs(rhs_.begin(), rhs_.begin() + static_cast<std::ptrdiff_t>(m));
        double last_diag = system_.diag[m - 1];
        std::vector<double> particular, response;
        if (block > 0 && pinned) {
            for (std::size_t i = m; i < n; ++i) next_[i] = g[i];
            reduced_rhs[m - 1] -= system_.sup[m - 1] * g[m];
        } else if (block > 0) {
            Tridiagonal<double> top(block);
            std::copy(system_.sub.begin() + static_cast<std::ptrdiff_t>(m), system_.sub.end(), top.sub.begin());
            std::copy(system_.diag.begin() + static_cast<std::ptrdiff_t>(m), system_.diag.end(), top.diag.begin());
            std::copy(system_.sup.begin() + static_cast<std::ptrdiff_t>(m), system_.sup.end(), top.sup.begin());
            std::vector<double> unit(block, 0.0);
            unit[0] = -system_.sub[m];
            particular.resize(block);
            response.resize(block);
            solve_tridiagonal<double>(top, std::span<const double>(rhs_).subspan(m), particular, scratch_);
            solve_tridiagonal<double>(top, unit, response, scratch_);
            last_diag += system_.sup[m - 1] * response[0];
            reduced_rhs[m - 1] -= system_.sup[m - 1] * particular[0];
        }

        // Projected SOR on the remaining rows, warm-started from the projected
        // unconstrained solve.
        for (std::size_t i = 0; i < m; ++i) project(i);
        for (int sweep = 1;; ++sweep) {
            double change = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                double acc = reduced_rhs[i];
                if (i > 0) acc -= system_.sub[i] * next_[i - 1];
                if (i + 1 < m) acc -= system_.sup[i] * next_[i + 1];
                const double d = i + 1 == m ? last_diag : system_.diag[i];
                const double omega = (i == 0 || i + 1 == n) ? 1.0 : params_.psor_omega;
                const double old = next_[i];
                next_[i] = old + omega * (acc / d - old);
                project(i);
                change = std::max(change, std::abs(next_[i] - old));
            }
            ++diag_.psor_sweeps;
            if (!std::isfinite(change) || change > 1e12)
                throw FvaError(ErrorCode::PsorDiverged, "projected SOR diverged");
            if (change < params_.psor_tol) break;
            if (sweep >= params_.psor_max_iters)
                throw FvaError(ErrorCode::PsorDiverged, "projected SOR exceeded its sweep budget");
        }

        if (block > 0 && !pinned) {
            for (std::size_t i = 0; i < block; ++i) {
                next_[m + i] = particular[i] + next_[m - 1] * response[i];
                project(m + i);
            }
        }
    }

    const PdeGrid& grid_;
    const FundingConfig& config_;
    const SolverParams& params_;
    double tol_;
    std::optional<std::vector<double>> obstacle_;
    bool upper_obstacle_;
    SolverDiagnostics& diag_;
    OperatorRows rows_;
    Tridiagonal<double> system_;
    std::vector<double> rhs_, next_, prev_iter_, scratch_;
    std::vector<LocalCoefficients> pattern_, trial_;
};

inline void record_boundary(std::span<const LocalCoefficients> pattern, std::span<const double> s, double t,
                            std::vector<BoundaryPoint>& out) {
    const std::size_t n = s.size();
    const auto position = [&](std::size_t i) {
        if (i == 0) return 0.5 * (s[0] + s[1]);
        if (i + 1 == n) return 0.5 * (s[n - 2] + s[n - 1]);
        return s[i];
    };
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (pattern[i].funded != pattern[i + 1].funded)
            out.push_back({t, 0.5 * (position(i) + position(i + 1))});
    }
}

inline PricingResult run(const Portfolio& portfolio, Side side, const FundingConfig& input_config, double spot,
                         const PdeGrid& grid, const SolverParams& params, bool american) {
    require_valid(input_config);
    const FundingConfig config = side == Side::RiskFree ? input_config.degenerate() : input_config;
    if (grid.size() < 3) throw FvaError(ErrorCode::GridTooCoarse, "grid needs at least 3 nodes");
    if (!(params.theta >= 0.5 && params.theta <= 1.0))
        throw FvaError(ErrorCode::InvalidInput, "theta must lie in [0.5, 1]");
    if (!(params.psor_omega > 0.0 && params.psor_omega < 2.0))
        throw FvaError(ErrorCode::InvalidInput, "psor_omega must lie in (0, 2)");
    const double tol = params.funding_tol_for(portfolio);
    if (!(tol > 0.0)) throw FvaError(ErrorCode::InvalidInput, "funding tolerance must be positive");

    const double ds = grid.ds();
    const auto spot_node = static_cast<long>(std::lround(spot / ds));
    if (!(spot > 0.0) || spot_node < 1 || spot_node > static_cast<long>(grid.size()) - 2)
        throw FvaError(ErrorCode::GridTooCoarse, "spot is not an interior grid point");

    const double sign = side_sign(side);
    std::vector<double> u(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) u[i] = sign * terminal_payoff(portfolio, grid.s_nodes[i]);

    PricingResult result;
    std::optional<std::vector<double>> obstacle;
    if (american) obstacle = u;
    Stepper stepper(grid, config, params, tol, std::move(obstacle), side == Side::Ask, result.diagnostics);

    const double expiry = portfolio.expiry();
    double tau = 0.0;
    if (params.keep_surface) {
        result.surface_times.push_back(expiry);
        result.surface.push_back(u);
    }
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const std::vector<LocalCoefficients>* pattern = nullptr;
        if (static_cast<int>(k) < params.rannacher_steps) {
            stepper.step(u, 1.0, 0.5 * grid.dt);
            pattern = &stepper.step(u, 1.0, 0.5 * grid.dt);
        } else {
            pattern = &stepper.step(u, params.theta, grid.dt);
        }
        tau = grid.dt * static_cast<double>(k + 1);
        const double t = std::max(expiry - tau, 0.0);
        if (config.r_b > config.r) record_boundary(*pattern, grid.s_nodes, t, result.funding_boundary);
        if (params.keep_surface) {
            result.surface_times.push_back(t);
            result.surface.push_back(u);
        }
    }

    const auto j = static_cast<std::size_t>(spot_node);
    const double x = (spot - grid.s_nodes[j]) / ds;
    const double first = 0.5 * (u[j + 1] - u[j - 1]);
    const double second = u[j + 1] - 2.0 * u[j] + u[j - 1];
    result.value = u[j] + x * first + 0.5 * x * x * second;
    result.delta = (first + x * second) / ds;
    result.gamma = second / (ds * ds);
    result.price = side == Side::Ask ? -result.value : result.value;
    result.profile = std::move(u);
    return result;
}

}  // namespace detail

/// European book under funding costs: Crank-Nicolson in time with the
/// funding indicator and financing branch localized per node and resolved by
/// fixed-point iteration at every step.
[[nodiscard]] inline PricingResult solve(const Portfolio& portfolio, Side side, const FundingConfig& config,
                                         double spot, const PdeGrid& grid, const SolverParams& params = {}) {
    return detail::run(portfolio, side, config, spot, grid, params, false);
}

/// American book: each funding iteration solves the linear complementarity
/// problem by projected SOR. The bid is held to U >= payoff; the ask to
/// -U >= payoff, i.e. the short is marked against the holder's exercise.
[[nodiscard]] inline PricingResult solve_american(const Portfolio& portfolio, Side side, const FundingConfig& config,
                                                  double spot, const PdeGrid& grid,
                                                  const SolverParams& params = {}) {
    if (portfolio.style() != ExerciseStyle::American)
        throw FvaError(ErrorCode::InvalidInput, "solve_american needs american legs");
    return detail::run(portfolio, side, config, spot, grid, params, true);
}

/// Dispatches on the portfolio's exercise style.
[[nodiscard]] inline PricingResult price_book(const Portfolio& portfolio, Side side, const FundingConfig& config,
                                              double spot, const PdeGrid& grid, const SolverParams& params = {}) {
    return portfolio.style() == ExerciseStyle::American ? solve_american(portfolio, side, config, spot, grid, params)
                                                        : solve(portfolio, side, config, spot, grid, params);
}

}  // namespace fva
