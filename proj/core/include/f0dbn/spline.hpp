#pragma once

#include <span>
#include <vector>

namespace f0dbn {

/// Natural cubic spline (zero second derivative at both ends) through
/// strictly increasing knots. Beyond the end knots it continues linearly,
/// which is the C2 extension under the natural boundary condition.
class NaturalCubicSpline {
public:
    /// Throws std::invalid_argument for fewer than 2 knots, mismatched
    /// lengths, or non-increasing x.
    NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

    double operator()(double t) const;

    const std::vector<double>& knots() const noexcept { return x_; }
    const std::vector<double>& values() const noexcept { return y_; }

    /// Second derivatives at the knots.
    const std::vector<double>& curvatures() const noexcept { return m_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> m_;
};

/// Solves a tridiagonal system with the Thomas algorithm. sub[0] and
/// super[n-1] are ignored. Throws std::invalid_argument on a zero pivot.
std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                      std::span<const double> super, std::span<const double> rhs);

} // namespace f0dbn
