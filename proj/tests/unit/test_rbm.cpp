#include "generators.hpp"

#include "f0dbn/rbm.hpp"

#include <doctest.h>

#include <cmath>

using namespace f0dbn;
using namespace f0dbn::testing;

namespace {

// Independent energy written from the definition, element by element.
double oracle_energy(const RbmParams& p, const Vector& v, const Vector& h)
{
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < h.size(); ++j) {
            e -= p.weights(i, j) * v[i] * h[j];
        }
        e -= p.visible_bias[i] * v[i];
    }
    for (std::size_t j = 0; j < h.size(); ++j) {
        e -= p.hidden_bias[j] * h[j];
    }
    return e;
}

// log Z by summing exp(-E) over every joint configuration.
double brute_log_z(const RbmParams& p)
{
    const std::size_t nv = p.visible_dim();
    const std::size_t nh = p.hidden_dim();
    std::vector<double> terms;
    for (std::uint64_t cv = 0; cv < (1ULL << nv); ++cv) {
        for (std::uint64_t ch = 0; ch < (1ULL << nh); ++ch) {
            terms.push_back(-oracle_energy(p, bits_of(cv, nv), bits_of(ch, nh)));
        }
    }
    long double m = *std::max_element(terms.begin(), terms.end());
    long double s = 0.0L;
    for (double t : terms) {
        s += std::exp(static_cast<long double>(t) - m);
    }
    return static_cast<double>(m + std::log(s));
}

// p(h_j = 1 | v) by enumerating all hidden configurations.
Vector brute_hidden_conditional(const RbmParams& p, const Vector& v)
{
    const std::size_t nh = p.hidden_dim();
    Vector num(nh, 0.0);
    long double den = 0.0L;
    for (std::uint64_t ch = 0; ch < (1ULL << nh); ++ch) {
        const Vector h = bits_of(ch, nh);
        const long double w = std::exp(-static_cast<long double>(oracle_energy(p, v, h)));
        den += w;
        for (std::size_t j = 0; j < nh; ++j) {
            if (h[j] != 0.0) {
                num[j] += static_cast<double>(w);
            }
        }
    }
    for (auto& x : num) {
        x = static_cast<double>(x / den);
    }
    return num;
}

RbmParams transposed(const RbmParams& p)
{
    return RbmParams(p.weights.transposed(), p.hidden_bias, p.visible_bias);
}

} // namespace

TEST_CASE("energy examples")
{
    RbmParams zero(3, 2);
    CHECK(energy(zero, Vector{1, 0, 1}, Vector{1, 1}) == 0.0);
    const RbmParams p(Matrix(2, 1, Vector{1, -1}), Vector{0.5, 0}, Vector{0.25});
    CHECK(energy(p, Vector{1, 0}, Vector{1}) == doctest::Approx(-1.75));
    Rng rng(1);
    const RbmParams r = random_rbm(4, 3, rng);
    CHECK(energy(r, Vector(4, 0.0), Vector(3, 0.0)) == 0.0);
    CHECK_THROWS_AS(energy(r, Vector{0.5, 0, 0, 0}, Vector(3, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(energy(r, Vector(3, 0.0), Vector(3, 0.0)), std::invalid_argument);
}

TEST_CASE("energy agrees with the oracle and is linear in each parameter block")
{
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t nv = 1 + rng.below(6);
        const std::size_t nh = 1 + rng.below(6);
        const RbmParams p = random_rbm(nv, nh, rng);
        const Vector v = random_binary(nv, rng);
        const Vector h = random_binary(nh, rng);
        CHECK(energy(p, v, h) == doctest::Approx(oracle_energy(p, v, h)).epsilon(1e-12));

        // Finite differences in each block equal the analytic (constant) slope.
        const std::size_t i = rng.below(nv);
        const std::size_t j = rng.below(nh);
        const double d = 0.37;
        RbmParams q = p;
        q.weights(i, j) += d;
        CHECK(std::abs((energy(q, v, h) - energy(p, v, h)) / d + v[i] * h[j]) < 1e-8);
        q = p;
        q.visible_bias[i] += d;
        CHECK(std::abs((energy(q, v, h) - energy(p, v, h)) / d + v[i]) < 1e-8);
        q = p;
        q.hidden_bias[j] += d;
        CHECK(std::abs((energy(q, v, h) - energy(p, v, h)) / d + h[j]) < 1e-8);
    }
}

TEST_CASE("conditional examples")
{
    RbmParams zero(3, 2);
    CHECK(hidden_conditional(zero, Vector{1, 0, 1}) == Vector{0.5, 0.5});
    CHECK(visible_conditional(zero, Vector{1, 0}) == Vector{0.5, 0.5, 0.5});
    RbmParams sat(2, 2);
    sat.hidden_bias = {10.0, 0.0};
    CHECK(hidden_conditional(sat, Vector{0, 0})[0] > 1.0 - 1e-4);
    sat.visible_bias = {-10.0, 0.0};
    CHECK(visible_conditional(sat, Vector{1, 1})[0] < 1e-4);
    const RbmParams ln3(Matrix(1, 1, Vector{std::log(3.0)}), Vector{0}, Vector{0});
    CHECK(hidden_conditional(ln3, Vector{1})[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK_THROWS_AS(hidden_conditional(zero, Vector{1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(visible_conditional(zero, Vector{1, 0, 1}), std::invalid_argument);
}

TEST_CASE("factorial conditionals equal enumerated Boltzmann conditionals")
{
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t nv = 1 + rng.below(6);
        const std::size_t nh = 1 + rng.below(6);
        const RbmParams p = random_rbm(nv, nh, rng, 1.5, 1.0);
        const Vector v = random_binary(nv, rng);
        const Vector fact = hidden_conditional(p, v);
        const Vector brute = brute_hidden_conditional(p, v);
        for (std::size_t j = 0; j < nh; ++j) {
            CHECK(std::abs(fact[j] - brute[j]) < 1e-10);
        }
        // Joint-configuration form of the same identity.
        const Vector h = random_binary(nh, rng);
        long double prod = 1.0L;
        for (std::size_t j = 0; j < nh; ++j) {
            prod *= h[j] != 0.0 ? fact[j] : 1.0 - fact[j];
        }
        long double den = 0.0L;
        for (std::uint64_t c = 0; c < (1ULL << nh); ++c) {
            den += std::exp(-static_cast<long double>(oracle_energy(p, v, bits_of(c, nh))));
        }
        const long double ratio = std::exp(-static_cast<long double>(oracle_energy(p, v, h))) / den;
        CHECK(std::abs(static_cast<double>(ratio - prod)) < 1e-10);

        const Vector hv = random_binary(nh, rng);
        const Vector vis = visible_conditional(p, hv);
        const Vector via_t = hidden_conditional(transposed(p), hv);
        for (std::size_t i = 0; i < nv; ++i) {
            CHECK(vis[i] == doctest::Approx(via_t[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("free energy marginalizes the hidden layer")
{
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t nv = 1 + rng.below(5);
        const std::size_t nh = 1 + rng.below(5);
        const RbmParams p = random_rbm(nv, nh, rng);
        const Vector v = random_binary(nv, rng);
        long double s = 0.0L;
        for (std::uint64_t c = 0; c < (1ULL << nh); ++c) {
            s += std::exp(-static_cast<long double>(oracle_energy(p, v, bits_of(c, nh))));
        }
        CHECK(free_energy(p, v) == doctest::Approx(static_cast<double>(-std::log(s))).epsilon(1e-12));
    }
}

TEST_CASE("exact log partition: closed forms, brute force and energy shift")
{
    CHECK(exact_log_partition(RbmParams(1, 1)) == doctest::Approx(std::log(4.0)));
    RbmParams b(2, 3);
    b.visible_bias = {1.0, 0.0};
    const double closed = std::log(1.0 + std::exp(1.0)) + std::log(2.0) + 3.0 * std::log(2.0);
    CHECK(exact_log_partition(b) == doctest::Approx(closed).epsilon(1e-13));
    CHECK(enumerate_log_partition(b) == doctest::Approx(closed).epsilon(1e-13));
    CHECK(brute_log_z(b) == doctest::Approx(closed).epsilon(1e-13));

    Rng rng(5);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t nv = 1 + rng.below(7);
        const std::size_t nh = 1 + rng.below(7);
        const RbmParams p = random_rbm(nv, nh, rng);
        const double oracle = brute_log_z(p);
        CHECK(exact_log_partition(p) == doctest::Approx(oracle).epsilon(1e-11));
        CHECK(enumerate_log_partition(p) == doctest::Approx(oracle).epsilon(1e-11));
    }

    CHECK_THROWS_AS(exact_log_partition(RbmParams(13, 12)), std::invalid_argument);
    CHECK_NOTHROW(exact_log_partition(RbmParams(20, 4)));
}

TEST_CASE("energy shift lowers log Z by the shift")
{
    Rng rng(6);
    const RbmParams p = random_rbm(3, 3, rng);
    const double c = 1.7;
    std::vector<double> terms;
    for (std::uint64_t cv = 0; cv < 8; ++cv) {
        for (std::uint64_t ch = 0; ch < 8; ++ch) {
            terms.push_back(-(oracle_energy(p, bits_of(cv, 3), bits_of(ch, 3)) + c));
        }
    }
    CHECK(log_sum_exp(terms) == doctest::Approx(exact_log_partition(p) - c).epsilon(1e-12));
}

TEST_CASE("exact log likelihood properties")
{
    RbmParams zero(5, 3);
    const std::vector<Vector> data{Vector{1, 0, 1, 1, 0}, Vector{0, 0, 0, 0, 0}};
    CHECK(exact_log_likelihood(zero, data) == doctest::Approx(-5.0 * std::log(2.0)));

    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const RbmParams p = random_rbm(4, 3, rng, 2.0);
        std::vector<Vector> d;
        for (int k = 0; k < 5; ++k) {
            d.push_back(random_binary(4, rng));
        }
        const double ll = exact_log_likelihood(p, d);
        CHECK(ll <= 0.0);
        // Permuting hidden units leaves the likelihood unchanged.
        RbmParams q = p;
        for (std::size_t i = 0; i < 4; ++i) {
            std::swap(q.weights(i, 0), q.weights(i, 2));
        }
        std::swap(q.hidden_bias[0], q.hidden_bias[2]);
        CHECK(exact_log_likelihood(q, d) == doctest::Approx(ll).epsilon(1e-12));
        // Probabilities over all visibles sum to one.
        long double total = 0.0L;
        for (std::uint64_t c = 0; c < 16; ++c) {
            total += std::exp(static_cast<long double>(exact_log_likelihood(p, std::vector<Vector>{bits_of(c, 4)})));
        }
        CHECK(static_cast<double>(total) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(exact_log_likelihood(zero, std::vector<Vector>{}), std::invalid_argument);
}

TEST_CASE("cd_gradient matches a step-by-step Gibbs oracle")
{
    Rng gen(8);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t nv = 1 + gen.below(6);
        const std::size_t nh = 1 + gen.below(6);
        const RbmParams p = trial == 0 ? RbmParams(nv, nh) : random_rbm(nv, nh, gen, 0.5, 0.5);
        std::vector<Vector> batch;
        for (std::size_t k = 0; k < 1 + gen.below(4); ++k) {
            batch.push_back(random_binary(nv, gen));
        }
        const std::size_t steps = 1 + gen.below(3);
        const std::uint64_t seed = gen.next_u64();

        Rng rng(seed);
        const RbmGradient g = cd_gradient(p, batch, rng, steps);
        CHECK(g.d_weights.rows() == nv);
        CHECK(g.d_weights.cols() == nh);

        // Oracle: same draws, explicit sigmoid formulas.
        Rng orng(seed);
        Matrix dw(nv, nh);
        Vector dvb(nv, 0.0);
        Vector dhb(nh, 0.0);
        auto hid = [&](const Vector& v) {
            Vector out(nh);
            for (std::size_t j = 0; j < nh; ++j) {
                double a = p.hidden_bias[j];
                for (std::size_t i = 0; i < nv; ++i) {
                    a += p.weights(i, j) * v[i];
                }
                out[j] = 1.0 / (1.0 + std::exp(-a));
            }
            return out;
        };
        auto vis = [&](const Vector& h) {
            Vector out(nv);
            for (std::size_t i = 0; i < nv; ++i) {
                double a = p.visible_bias[i];
                for (std::size_t j = 0; j < nh; ++j) {
                    a += p.weights(i, j) * h[j];
                }
                out[i] = 1.0 / (1.0 + std::exp(-a));
            }
            return out;
        };
        auto sample = [&](const Vector& probs) {
            Vector s(probs.size());
            for (std::size_t k = 0; k < probs.size(); ++k) {
                s[k] = orng.uniform() < probs[k] ? 1.0 : 0.0;
            }
            return s;
        };
        for (const auto& v0 : batch) {
            const Vector h0 = hid(v0);
            Vector hs = sample(h0);
            Vector vk;
            Vector hk;
            for (std::size_t s = 0; s < steps; ++s) {
                vk = vis(hs);
                hk = hid(vk);
                if (s + 1 < steps) {
                    hs = sample(hk);
                }
            }
            for (std::size_t i = 0; i < nv; ++i) {
                for (std::size_t j = 0; j < nh; ++j) {
                    dw(i, j) += (v0[i] * h0[j] - vk[i] * hk[j]) / static_cast<double>(batch.size());
                }
                dvb[i] += (v0[i] - vk[i]) / static_cast<double>(batch.size());
            }
            for (std::size_t j = 0; j < nh; ++j) {
                dhb[j] += (h0[j] - hk[j]) / static_cast<double>(batch.size());
            }
        }
        for (std::size_t k = 0; k < dw.size(); ++k) {
            CHECK(g.d_weights.data()[k] == doctest::Approx(dw.data()[k]).epsilon(1e-12));
        }
        for (std::size_t i = 0; i < nv; ++i) {
            CHECK(g.d_visible_bias[i] == doctest::Approx(dvb[i]).epsilon(1e-12));
        }
        for (std::size_t j = 0; j < nh; ++j) {
            CHECK(g.d_hidden_bias[j] == doctest::Approx(dhb[j]).epsilon(1e-12));
        }
        // Both generators consumed the same number of draws.
        CHECK(rng.next_u64() == orng.next_u64());
    }
}

TEST_CASE("cd_gradient vanishes at a deterministic fixed point")
{
    // Huge weights tie each visible unit to one hidden unit, so the chain
    // reproduces the data exactly.
    const std::size_t n = 4;
    RbmParams p(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        p.weights(i, i) = 60.0;
        p.visible_bias[i] = -30.0;
        p.hidden_bias[i] = -30.0;
    }
    const std::vector<Vector> batch{Vector{1, 0, 1, 0}, Vector{0, 1, 1, 1}};
    Rng rng(9);
    const RbmGradient g = cd_gradient(p, batch, rng);
    for (double x : g.d_weights.data()) {
        CHECK(std::abs(x) < 1e-9);
    }
    CHECK_THROWS_AS(cd_gradient(p, std::vector<Vector>{}, rng), std::invalid_argument);
    CHECK_THROWS_AS(cd_gradient(p, std::vector<Vector>{Vector{0.5, 0, 0, 0}}, rng), std::invalid_argument);
    CHECK_THROWS_AS(cd_gradient(p, batch, rng, 0), std::invalid_argument);
}

TEST_CASE("apply_update momentum recursion")
{
    RbmParams p(2, 2);
    RbmGradient g = RbmGradient::zeros_like(p);
    g.d_weights(0, 1) = 2.0;
    g.d_visible_bias[0] = -1.0;
    g.d_hidden_bias[1] = 0.5;

    RbmTrainConfig sgd;
    sgd.momentum = 0.0;
    sgd.learning_rate = 0.1;
    const RbmUpdate u = apply_update(p, g, RbmGradient::zeros_like(p), sgd);
    CHECK(u.params.weights(0, 1) == doctest::Approx(0.2));
    CHECK(u.params.visible_bias[0] == doctest::Approx(-0.1));
    CHECK(u.params.hidden_bias[1] == doctest::Approx(0.05));

    RbmTrainConfig mom;
    mom.momentum = 0.95;
    mom.learning_rate = 0.002;
    RbmVelocity w = RbmGradient::zeros_like(p);
    w.d_weights(1, 1) = 3.0;
    const RbmUpdate decay = apply_update(p, RbmGradient::zeros_like(p), w, mom);
    CHECK(decay.velocity.d_weights(1, 1) == doctest::Approx(0.95 * 3.0));

    const RbmUpdate s1 = apply_update(p, g, RbmGradient::zeros_like(p), mom);
    const RbmUpdate s2 = apply_update(s1.params, g, s1.velocity, mom);
    const double step2 = s2.params.weights(0, 1) - s1.params.weights(0, 1);
    CHECK(step2 == doctest::Approx(0.002 * 1.95 * 2.0).epsilon(1e-12));

    CHECK_THROWS_AS(apply_update(RbmParams(3, 2), g, w, mom), std::invalid_argument);
}

TEST_CASE("config validation")
{
    RbmTrainConfig c;
    CHECK(c.learning_rate == 0.002);
    CHECK(c.momentum == 0.95);
    CHECK(c.epochs == 50);
    CHECK(c.minibatch_size == 10);
    CHECK(c.cd_steps == 1);
    CHECK_NOTHROW(c.validate());
    auto bad = [&](auto mutate) {
        RbmTrainConfig x;
        mutate(x);
        CHECK_THROWS_AS(x.validate(), std::invalid_argument);
    };
    bad([](RbmTrainConfig& x) { x.learning_rate = 0.0; });
    bad([](RbmTrainConfig& x) { x.momentum = 1.0; });
    bad([](RbmTrainConfig& x) { x.momentum = -0.1; });
    bad([](RbmTrainConfig& x) { x.minibatch_size = 0; });
    bad([](RbmTrainConfig& x) { x.cd_steps = 0; });
}

TEST_CASE("train_rbm determinism, zero epochs and errors")
{
    Rng rng(10);
    std::vector<Vector> data;
    for (int k = 0; k < 37; ++k) {
        data.push_back(random_binary(6, rng));
    }
    RbmTrainConfig c;
    c.epochs = 5;
    c.seed = 77;
    const RbmParams a = train_rbm(data, 6, 4, c);
    const RbmParams b = train_rbm(data, 6, 4, c);
    CHECK(a == b);
    c.seed = 78;
    CHECK_FALSE(train_rbm(data, 6, 4, c) == a);

    c.epochs = 0;
    c.seed = 77;
    Rng init(77);
    CHECK(train_rbm(data, 6, 4, c) == init_rbm(6, 4, init));

    std::vector<std::pair<std::size_t, double>> seen;
    c.epochs = 3;
    train_rbm(data, 6, 4, c, [&](std::size_t e, double r) { seen.emplace_back(e, r); });
    REQUIRE(seen.size() == 3);
    CHECK(seen[0].first == 1);
    CHECK(seen[2].first == 3);

    CHECK_THROWS_AS(train_rbm(std::vector<Vector>{}, 6, 4, c), std::invalid_argument);
    CHECK_THROWS_AS(train_rbm(data, 5, 4, c), std::invalid_argument);
}

TEST_CASE("init_rbm statistics")
{
    Rng rng(12);
    const RbmParams p = init_rbm(200, 100, rng);
    double s = 0.0;
    double sq = 0.0;
    for (double w : p.weights.data()) {
        s += w;
        sq += w * w;
    }
    const double n = static_cast<double>(p.weights.size());
    CHECK(std::abs(s / n) < 5e-4);
    CHECK(std::sqrt(sq / n) == doctest::Approx(0.01).epsilon(0.03));
    for (double b : p.visible_bias) {
        CHECK(b == 0.0);
    }
    for (double b : p.hidden_bias) {
        CHECK(b == 0.0);
    }
}

TEST_CASE("one small CD epoch rarely lowers the likelihood")
{
    const std::vector<Vector> data{Vector{1, 1, 0, 0}, Vector{1, 1, 1, 0}, Vector{0, 0, 1, 1},
                                   Vector{0, 1, 1, 1}, Vector{1, 1, 0, 0}, Vector{0, 0, 1, 1}};
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        RbmParams p = random_rbm(4, 3, rng, 0.1, 0.1);
        const double before = exact_log_likelihood(p, data);
        RbmTrainConfig c;
        c.learning_rate = 0.01;
        c.momentum = 0.0;
        RbmVelocity vel = RbmGradient::zeros_like(p);
        Rng cd(seed + 100);
        const RbmGradient g = cd_gradient(p, data, cd);
        p = apply_update(p, g, vel, c).params;
        if (exact_log_likelihood(p, data) >= before) {
            ++ok;
        }
    }
    CHECK(ok >= 18);
}

TEST_CASE("params validation")
{
    CHECK_THROWS_AS(RbmParams(Matrix(2, 3), Vector(2), Vector(2)), std::invalid_argument);
    CHECK_THROWS_AS(RbmParams(Matrix(2, 1, Vector{1, NAN}), Vector(2), Vector(1)), std::invalid_argument);
}
