#include "f0dbn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace f0dbn {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size())
                                    + " does not match " + std::to_string(rows) + "x"
                                    + std::to_string(cols));
    }
}

Matrix Matrix::transposed() const
{
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t(c, r) = (*this)(r, c);
        }
    }
    return t;
}

double sigmoid(double x) noexcept
{
    // Evaluated on the side that cannot overflow.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) noexcept
{
    if (x > 0.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

double log_sum_exp(std::span<const double> xs) noexcept
{
    if (xs.empty()) {
        return -std::numeric_limits<double>::infinity();
    }
    const double m = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(m)) {
        return m;
    }
    double s = 0.0;
    for (double x : xs) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

Vector matvec(const Matrix& m, std::span<const double> v)
{
    if (m.cols() != v.size()) {
        throw std::invalid_argument("matvec: matrix has " + std::to_string(m.cols())
                                    + " columns but vector has length " + std::to_string(v.size()));
    }
    Vector out(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out[r] = dot(m.row(r), v);
    }
    return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v)
{
    if (m.rows() != v.size()) {
        throw std::invalid_argument("matvec_transposed: matrix has " + std::to_string(m.rows())
                                    + " rows but vector has length " + std::to_string(v.size()));
    }
    Vector out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double vr = v[r];
        if (vr == 0.0) {
            continue;
        }
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) {
            out[c] += row[c] * vr;
        }
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: length mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

bool all_finite(std::span<const double> xs) noexcept
{
    return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

bool is_binary(std::span<const double> xs) noexcept
{
    return std::all_of(xs.begin(), xs.end(), [](double x) { return x == 0.0 || x == 1.0; });
}

std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
{
    return (x << k) | (x >> (64 - k));
}

} // namespace

Rng::Rng(std::uint64_t seed) noexcept
{
    std::uint64_t sm = seed;
    for (auto& s : state_) {
        s = splitmix64(sm);
    }
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream_index) noexcept
{
    std::uint64_t sm = seed ^ 0x6a09e667f3bcc909ULL;
    const std::uint64_t a = splitmix64(sm);
    sm = stream_index + 0xbb67ae8584caa73bULL;
    const std::uint64_t b = splitmix64(sm);
    return Rng(a ^ rotl(b, 17));
}

std::uint64_t Rng::next_u64() noexcept
{
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() noexcept
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept
{
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) noexcept
{
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
                                - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return x % n;
}

Vector bernoulli_sample(std::span<const double> p, Rng& rng)
{
    Vector out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
            throw std::invalid_argument("bernoulli_sample: probability " + std::to_string(p[i])
                                        + " at index " + std::to_string(i) + " outside [0, 1]");
        }
        out[i] = rng.uniform() < p[i] ? 1.0 : 0.0;
    }
    return out;
}

} // namespace f0dbn
