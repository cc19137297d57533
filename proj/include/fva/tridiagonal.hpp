#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fva/errors.hpp"

namespace fva {

/// Row i reads sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i].
/// sub[0] and sup[n-1] are ignored.
template <typename Real = double>
struct Tridiagonal {
    std::vector<Real> sub, diag, sup;

    Tridiagonal() = default;
    explicit Tridiagonal(std::size_t n) : sub(n, Real{0}), diag(n, Real{0}), sup(n, Real{0}) {}

    [[nodiscard]] std::size_t size() const noexcept { return diag.size(); }

    /// y = A x
    void multiply(std::span<const Real> x, std::span<Real> y) const noexcept {
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            Real acc = diag[i] * x[i];
            if (i > 0) acc += sub[i] * x[i - 1];
            if (i + 1 < n) acc += sup[i] * x[i + 1];
            y[i] = acc;
        }
    }
};

/// Thomas algorithm. Throws on a vanishing pivot; no pivoting is attempted.
template <typename Real>
void solve_tridiagonal(const Tridiagonal<Real>& a, std::span<const Real> rhs, std::span<Real> x,
                       std::vector<Real>& scratch) {
    const std::size_t n = a.size();
    scratch.resize(n);
    Real pivot = a.diag[0];
    if (pivot == Real{0} || !std::isfinite(pivot)) throw FvaError(ErrorCode::InvalidInput, "singular tridiagonal system");
    x[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = a.sup[i - 1] / pivot;
        pivot = a.diag[i] - a.sub[i] * scratch[i];
        if (pivot == Real{0} || !std::isfinite(pivot))
            throw FvaError(ErrorCode::InvalidInput, "singular tridiagonal system");
        x[i] = (rhs[i] - a.sub[i] * x[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= scratch[i + 1] * x[i + 1];
}

}  // namespace fva
