#include "f0dbn/spline.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace f0dbn {

std::vector<double> solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                                      std::span<const double> super, std::span<const double> rhs)
{
    const std::size_t n = diag.size();
    if (sub.size() != n || super.size() != n || rhs.size() != n) {
        throw std::invalid_argument("solve_tridiagonal: band lengths differ");
    }
    if (n == 0) {
        return {};
    }
    std::vector<double> c(n);
    std::vector<double> d(n);
    double pivot = diag[0];
    if (pivot == 0.0) {
        throw std::invalid_argument("solve_tridiagonal: zero pivot");
    }
    c[0] = super[0] / pivot;
    d[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = diag[i] - sub[i] * c[i - 1];
        if (pivot == 0.0) {
            throw std::invalid_argument("solve_tridiagonal: zero pivot at row " + std::to_string(i));
        }
        c[i] = i + 1 < n ? super[i] / pivot : 0.0;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    return x;
}

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)), m_(x_.size(), 0.0)
{
    const std::size_t n = x_.size();
    if (n < 2) {
        throw std::invalid_argument("NaturalCubicSpline: at least 2 knots required");
    }
    if (y_.size() != n) {
        throw std::invalid_argument("NaturalCubicSpline: x and y lengths differ");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x_[i] > x_[i - 1])) {
            throw std::invalid_argument("NaturalCubicSpline: knots must be strictly increasing");
        }
    }
    if (n == 2) {
        return;
    }
    // Interior second derivatives from the standard continuity conditions.
    const std::size_t k = n - 2;
    std::vector<double> sub(k), diag(k), super(k), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        sub[i - 1] = h0;
        diag[i - 1] = 2.0 * (h0 + h1);
        super[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    const std::vector<double> interior = solve_tridiagonal(sub, diag, super, rhs);
    std::copy(interior.begin(), interior.end(), m_.begin() + 1);
}

double NaturalCubicSpline::operator()(double t) const
{
    const std::size_t n = x_.size();
    if (t <= x_.front()) {
        const double h = x_[1] - x_[0];
        const double slope = (y_[1] - y_[0]) / h - h * (2.0 * m_[0] + m_[1]) / 6.0;
        return y_[0] + slope * (t - x_[0]);
    }
    if (t >= x_.back()) {
        const double h = x_[n - 1] - x_[n - 2];
        const double slope = (y_[n - 1] - y_[n - 2]) / h + h * (m_[n - 2] + 2.0 * m_[n - 1]) / 6.0;
        return y_[n - 1] + slope * (t - x_[n - 1]);
    }
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

} // namespace f0dbn
