#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "helpers.hpp"
#include "subgroupte/matrix.hpp"

using namespace subgroupte;
using testutil::random_matrix;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j)
            for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
    return c;
}

}  // namespace

TEST_SUITE("matrix") {

TEST_CASE("construction and element access") {
    Matrix m = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(m(0, 1) == 2.0);
    CHECK(m(1, 0) == 3.0);
    m(1, 0) = -7.0;
    CHECK(m.at_flat(2) == -7.0);
    CHECK(m.row(0)[1] == 2.0);
}

TEST_CASE("identity matmul is the identity map") {
    Rng rng = make_rng(11);
    const Matrix a = random_matrix(4, 4, rng);
    CHECK(max_abs_diff(matmul(a, Matrix::identity(4)), a) == 0.0);
    CHECK(max_abs_diff(matmul(Matrix::identity(4), a), a) == 0.0);
}

TEST_CASE("matmul matches a straight-loop oracle") {
    Rng rng = make_rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(uniform_in(rng, 0, 6));
        const std::size_t k = 1 + static_cast<std::size_t>(uniform_in(rng, 0, 6));
        const std::size_t m = 1 + static_cast<std::size_t>(uniform_in(rng, 0, 6));
        const Matrix a = random_matrix(n, k, rng);
        const Matrix b = random_matrix(k, m, rng);
        CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
    }
}

TEST_CASE("transposed products match transpose-then-multiply") {
    Rng rng = make_rng(7);
    const Matrix a = random_matrix(5, 3, rng);
    const Matrix b = random_matrix(5, 4, rng);
    CHECK(max_abs_diff(matmul_at_b(a, b), naive_matmul(transpose(a), b)) < 1e-12);

    const Matrix c = random_matrix(4, 6, rng);
    const Matrix d = random_matrix(5, 6, rng);
    CHECK(max_abs_diff(matmul_a_bt(c, d), naive_matmul(c, transpose(d))) < 1e-12);
}

TEST_CASE("transpose is an involution") {
    Rng rng = make_rng(3);
    const Matrix a = random_matrix(3, 7, rng);
    CHECK(max_abs_diff(transpose(transpose(a)), a) == 0.0);
}

TEST_CASE("elementwise arithmetic") {
    Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    const Matrix b = Matrix::from_rows({{10.0, 20.0}, {30.0, 40.0}});

    Matrix sum = a;
    add_inplace(sum, b);
    CHECK(sum(1, 1) == 44.0);

    Matrix diff = b;
    sub_inplace(diff, a);
    CHECK(diff(0, 0) == 9.0);

    Matrix scaled = a;
    scale_inplace(scaled, -2.0);
    CHECK(scaled(1, 0) == -6.0);

    Matrix axpy = a;
    axpy_inplace(axpy, 0.5, b);
    CHECK(axpy(0, 1) == 12.0);
}

TEST_CASE("row broadcast and column sums") {
    Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    const Matrix row = Matrix::from_rows({{10.0, 100.0}});
    add_row_broadcast(a, row);
    CHECK(a(0, 0) == 11.0);
    CHECK(a(1, 1) == 104.0);

    const Matrix sums = column_sums(a);
    CHECK(sums.rows() == 1);
    CHECK(sums(0, 0) == 24.0);
    CHECK(sums(0, 1) == 206.0);
}

TEST_CASE("hcat concatenates columns") {
    const Matrix a = Matrix::from_rows({{1.0}, {2.0}});
    const Matrix b = Matrix::from_rows({{3.0, 4.0}, {5.0, 6.0}});
    const Matrix c = hcat(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 3);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(0, 2) == 4.0);
    CHECK(c(1, 1) == 5.0);
}

TEST_CASE("shape mismatches throw") {
    const Matrix a(2, 3);
    const Matrix b(2, 3);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
    Matrix c(3, 2);
    CHECK_THROWS_AS(add_inplace(c, a), std::invalid_argument);
    CHECK_THROWS_AS(hcat(a, c), std::invalid_argument);
    CHECK_THROWS_AS(max_abs_diff(a, c), std::invalid_argument);
}

TEST_CASE("all_finite flags bad entries") {
    Matrix a(2, 2, 1.0);
    CHECK(a.all_finite());
    a(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(a.all_finite());
}

}  // TEST_SUITE
