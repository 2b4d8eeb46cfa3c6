#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "cande/nn.hpp"

using namespace cande;
using nn::Activation;
using nn::Matrix;

namespace {

template <typename T>
Matrix<T> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& eng, double scale = 1.0) {
    Matrix<T> m(r, c);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& x : m.data) x = static_cast<T>(dist(eng));
    return m;
}

film::FilmGenerator<double> identity_generator(std::size_t p, std::size_t q) {
    film::FilmGenerator<double> gen;
    gen.w_gamma = Matrix<double>(p, q);
    gen.w_beta = Matrix<double>(p, q);
    gen.b_gamma.assign(q, 1.0);
    gen.b_beta.assign(q, 0.0);
    return gen;
}

}  // namespace

TEST_CASE("film_params with zero weights and unit gamma bias is identity conditioning") {
    auto gen = identity_generator(3, 4);
    std::vector<double> h = {0.2, -0.5, 0.9};
    auto [gamma, beta] = film::film_params(gen, std::span<const double>(h));
    for (double g : gamma) CHECK(g == 1.0);
    for (double b : beta) CHECK(b == 0.0);
}

TEST_CASE("film_params with one-hot context selects a generator row") {
    std::mt19937_64 eng(31);
    film::FilmGenerator<double> gen;
    gen.w_gamma = random_matrix<double>(4, 3, eng);
    gen.w_beta = random_matrix<double>(4, 3, eng);
    gen.b_gamma = {0.1, 0.2, 0.3};
    gen.b_beta = {-0.1, 0.0, 0.1};
    std::vector<double> h = {0.0, 0.0, 1.0, 0.0};  // selects row 2
    auto [gamma, beta] = film::film_params(gen, std::span<const double>(h));
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(gamma[j] == gen.w_gamma(2, j) + gen.b_gamma[j]);
        CHECK(beta[j] == gen.w_beta(2, j) + gen.b_beta[j]);
    }
}

TEST_CASE("film_params matches a hand-rolled matvec oracle") {
    std::mt19937_64 eng(32);
    film::FilmGenerator<double> gen;
    gen.w_gamma = random_matrix<double>(4, 3, eng);
    gen.w_beta = random_matrix<double>(4, 3, eng);
    gen.b_gamma = {0.5, -0.5, 0.25};
    gen.b_beta = {1.0, 2.0, 3.0};
    std::vector<double> h = {0.3, -0.7, 0.2, 0.9};
    auto [gamma, beta] = film::film_params(gen, std::span<const double>(h));
    for (std::size_t j = 0; j < 3; ++j) {
        double eg = gen.b_gamma[j], eb = gen.b_beta[j];
        for (std::size_t i = 0; i < 4; ++i) {
            eg += h[i] * gen.w_gamma(i, j);
            eb += h[i] * gen.w_beta(i, j);
        }
        CHECK(gamma[j] == doctest::Approx(eg).epsilon(1e-12));
        CHECK(beta[j] == doctest::Approx(eb).epsilon(1e-12));
    }

    std::vector<double> short_h = {1.0, 2.0};
    CHECK_THROWS_AS(film::film_params(gen, std::span<const double>(short_h)), ShapeError);
}

TEST_CASE("film_apply identity, annihilation and direct arithmetic") {
    std::vector<double> z = {1.0, -2.0, 3.0};
    std::vector<double> ones = {1.0, 1.0, 1.0};
    std::vector<double> zeros = {0.0, 0.0, 0.0};
    auto out = film::film_apply<double>(z, ones, zeros);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == z[i]);

    std::vector<double> beta = {5.0, 6.0, 7.0};
    out = film::film_apply<double>(z, zeros, beta);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == beta[i]);

    std::vector<double> gamma = {2.0, 0.5, -1.0};
    std::vector<double> shift = {0.0, 1.0, 1.0};
    out = film::film_apply<double>(z, gamma, shift);
    CHECK(out[0] == 2.0);
    CHECK(out[1] == 0.0);
    CHECK(out[2] == -2.0);

    std::vector<double> wrong = {1.0};
    CHECK_THROWS_AS(film::film_apply<double>(z, gamma, wrong), ShapeError);
}

TEST_CASE("film_backward passes upstream through identity conditioning") {
    std::mt19937_64 eng(33);
    auto gen = identity_generator(2, 3);
    auto context = random_matrix<double>(4, 2, eng);
    auto pre = random_matrix<double>(4, 3, eng);
    Matrix<double> gamma(4, 3, 1.0);
    auto upstream = random_matrix<double>(4, 3, eng);
    auto g = film::film_backward(gen, context, pre, gamma, upstream);
    for (std::size_t i = 0; i < upstream.size(); ++i) {
        CHECK(g.pre_activation.data[i] == upstream.data[i]);
    }
    // dL/db_beta is the column sum of the upstream gradient
    for (std::size_t j = 0; j < 3; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < 4; ++i) s += upstream(i, j);
        CHECK(g.b_beta[j] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("full FiLM-conditioned layer gradient matches finite differences") {
    std::mt19937_64 eng(34);
    auto net = nn::make_feedforward<double>(
        4, {3, 4}, {Activation::ReLU, Activation::Linear}, 2, nn::FilmInit::Glorot, eng);
    auto x = random_matrix<double>(3, 4, eng);
    auto ctx = random_matrix<double>(3, 2, eng);
    auto target = random_matrix<double>(3, 4, eng);
    double err = nn::grad_check(
        net, x, ctx, [&](const Matrix<double>& out) { return nn::mse_loss(target, out); });
    CHECK(err < 1e-4);
}

TEST_CASE("identity-generator CANDE forward is bit-identical to the unconditioned twin") {
    std::mt19937_64 eng(35);
    auto plain = nn::make_feedforward<float>(
        6, {5, 3, 5, 6},
        {Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::Sigmoid}, 0,
        nn::FilmInit::Identity, eng);
    nn::FeedForward<float> cande = plain;  // same dense weights
    std::mt19937_64 eng2(36);
    for (std::size_t k = 0; k + 1 < cande.layers.size(); ++k) {
        cande.generators.push_back(nn::make_film_generator<float>(
            3, cande.layers[k].out_dim(), nn::FilmInit::Identity, eng2));
    }
    cande.validate();

    std::mt19937_64 eng3(37);
    for (int trial = 0; trial < 25; ++trial) {
        auto x = random_matrix<float>(2, 6, eng3);
        auto ctx = random_matrix<float>(2, 3, eng3);
        auto out_plain = nn::forward(plain, x);
        auto out_cande = nn::forward(cande, x, ctx);
        for (std::size_t i = 0; i < out_plain.size(); ++i) {
            CHECK(out_plain.data[i] == out_cande.data[i]);
        }
    }
}

TEST_CASE("one-hot row-selection property holds exactly for random generators") {
    std::mt19937_64 eng(38);
    for (int trial = 0; trial < 10; ++trial) {
        film::FilmGenerator<float> gen;
        gen.w_gamma = random_matrix<float>(5, 4, eng);
        gen.w_beta = random_matrix<float>(5, 4, eng);
        gen.b_gamma = {0.1f, 0.2f, 0.3f, 0.4f};
        gen.b_beta = {0.0f, -0.1f, 0.1f, 0.2f};
        std::uniform_int_distribution<std::size_t> pick(0, 4);
        std::size_t row = pick(eng);
        std::vector<float> h(5, 0.0f);
        h[row] = 1.0f;
        auto [gamma, beta] = film::film_params(gen, std::span<const float>(h));
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(gamma[j] == gen.w_gamma(row, j) + gen.b_gamma[j]);
            CHECK(beta[j] == gen.w_beta(row, j) + gen.b_beta[j]);
        }
    }
}

TEST_CASE("conditioned networks have one generator per hidden layer") {
    std::mt19937_64 eng(39);
    auto net = nn::make_feedforward<float>(
        8, {6, 4, 6, 8},
        {Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::Linear}, 3,
        nn::FilmInit::Glorot, eng);
    CHECK(net.generators.size() == net.layers.size() - 1);
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        CHECK(net.generators[k].width() == net.layers[k].out_dim());
        CHECK(net.generators[k].context_dim() == 3);
    }
}

TEST_CASE("gradients through the FiLM path pass grad_check at 1e-4 over seeds") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 eng(seed);
        auto net = nn::make_feedforward<double>(
            5, {4, 3, 5}, {Activation::ReLU, Activation::ReLU, Activation::Linear}, 3,
            nn::FilmInit::Glorot, eng);
        auto x = random_matrix<double>(2, 5, eng);
        auto ctx = random_matrix<double>(2, 3, eng);
        double err = nn::grad_check(
            net, x, ctx, [&](const Matrix<double>& out) { return nn::mse_loss(x, out); });
        CHECK(err < 1e-4);
    }
}
