#include <doctest.h>

#include <cmath>

#include "oracle_helpers.hpp"
#include "spmc/matrix_exp.hpp"

using namespace spmc;

TEST_CASE("exponential of a diagonal matrix") {
    Matrix a = Matrix::Zero(3, 3);
    a.diagonal() << -1.0, 0.5, 2.0;
    const Matrix e = matrix_exponential(a);
    for (int i = 0; i < 3; ++i) CHECK(e(i, i) == doctest::Approx(std::exp(a(i, i))).epsilon(1e-14));
    CHECK(std::abs(e(0, 1)) < 1e-15);
}

TEST_CASE("exponential of a nilpotent matrix ends its series") {
    Matrix a(2, 2);
    a << 0.0, 1.0, 0.0, 0.0;
    const Matrix e = matrix_exponential(a);
    CHECK(e(0, 0) == doctest::Approx(1.0));
    CHECK(e(0, 1) == doctest::Approx(1.0));
    CHECK(e(1, 0) == doctest::Approx(0.0));
    CHECK(e(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("two-state generator has the known closed form") {
    // exp(Qt) = 1 nu + e^{-2t}(I - 1 nu) for the symmetric two-state chain.
    Matrix q(2, 2);
    q << -1.0, 1.0, 1.0, -1.0;
    for (double t : {0.05, 0.3, 1.0, 4.0}) {
        const Matrix e = matrix_exponential(q * t);
        const double decay = std::exp(-2.0 * t);
        CHECK(e(0, 0) == doctest::Approx(0.5 + 0.5 * decay).epsilon(1e-13));
        CHECK(e(0, 1) == doctest::Approx(0.5 - 0.5 * decay).epsilon(1e-13));
        CHECK(e(1, 0) == doctest::Approx(0.5 - 0.5 * decay).epsilon(1e-13));
    }
}

TEST_CASE("agrees with scaled Taylor summation on random matrices") {
    PhiloxRng rng(2024, 7);
    for (int trial = 0; trial < 20; ++trial) {
        const int dim = 2 + static_cast<int>(rng.next_double() * 5);
        Matrix a(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) a(i, j) = 4.0 * rng.next_double() - 2.0;
        const Matrix pade = matrix_exponential(a);
        const Matrix taylor = spmc::testing::taylor_expm(a);
        const double scale = taylor.cwiseAbs().maxCoeff();
        CHECK((pade - taylor).cwiseAbs().maxCoeff() / scale < 1e-12);
    }
}

TEST_CASE("scaling path handles large norms") {
    Matrix q(2, 2);
    q << -30.0, 30.0, 30.0, -30.0;
    const Matrix e = matrix_exponential(q * 2.0);  // norm 120, deep squaring
    CHECK(e(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(e(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    const Matrix tiny = matrix_exponential(Matrix::Zero(3, 3));
    CHECK((tiny - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("semigroup identity exp(A)exp(A) = exp(2A)") {
    PhiloxRng rng(99, 1);
    const Matrix a = spmc::testing::random_generator(4, rng);
    const Matrix once = matrix_exponential(a);
    const Matrix twice = matrix_exponential(2.0 * a);
    CHECK((once * once - twice).cwiseAbs().maxCoeff() < 1e-13);
}
