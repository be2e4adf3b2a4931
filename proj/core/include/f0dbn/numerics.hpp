#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace f0dbn {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double sigmoid(double x) noexcept;

/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

/// log(sum(exp(xs))); returns -inf for an empty range.
double log_sum_exp(std::span<const double> xs) noexcept;

/// m * v. Throws std::invalid_argument when m.cols() != v.size().
Vector matvec(const Matrix& m, std::span<const double> v);

/// transpose(m) * v. Throws std::invalid_argument when m.rows() != v.size().
Vector matvec_transposed(const Matrix& m, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> xs) noexcept;
bool is_binary(std::span<const double> xs) noexcept;

/// xoshiro256** seeded through splitmix64. The output stream depends only on
/// the seed, and the derived real-valued draws use no library distributions,
/// so sequences are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept;

    /// Independent stream for (seed, stream_index) pairs.
    static Rng derive(std::uint64_t seed, std::uint64_t stream_index) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 bits of precision.
    double uniform() noexcept;

    /// Standard normal via Box-Muller (one draw consumes two uniforms).
    double normal() noexcept;

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

    /// Fisher-Yates shuffle driven by below().
    template <typename T>
    void shuffle(std::vector<T>& items) noexcept
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t state_[4];
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Samples each entry as 1 with probability p_i. Throws std::invalid_argument
/// if any p_i lies outside [0, 1].
Vector bernoulli_sample(std::span<const double> p, Rng& rng);

} // namespace f0dbn
