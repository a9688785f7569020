#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "aemu/errors.hpp"

namespace aemu {

// Dense row-major matrix. Plain storage, value semantics; all the linear
// algebra the project needs lives in the free functions below.
template <typename T>
struct MatT {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    MatT() = default;
    MatT(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

    T* row(std::size_t i) { return data.data() + i * cols; }
    const T* row(std::size_t i) const { return data.data() + i * cols; }

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    T operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return rows * cols; }

    // Reshape without reallocating when capacity suffices (batch reuse).
    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.resize(r * c);
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

using Mat = MatT<double>;
using MatF = MatT<float>;

namespace detail {

inline void check_shapes(std::size_t got_r, std::size_t got_c, std::size_t want_r,
                         std::size_t want_c, const char* what) {
    if (got_r != want_r || got_c != want_c)
        throw DataError(std::string("shape mismatch in ") + what);
}

} // namespace detail

// Four rows of A against two rows of B per pass: every streamed B vector is
// reused eight times from registers and the inner loop is a unit-stride
// saxpy the compiler turns into FMA vectors. All four accumulator rows go
// through the same instruction sequence, so a row's result does not depend
// on which lane it lands in.
template <typename T>
void gemm_block4(const T* __restrict a0, const T* __restrict a1, const T* __restrict a2,
                 const T* __restrict a3, T* __restrict c0, T* __restrict c1, T* __restrict c2,
                 T* __restrict c3, const T* __restrict b, std::size_t k, std::size_t n) {
    std::size_t p = 0;
    for (; p + 2 <= k; p += 2) {
        const T* bp = b + p * n;
        const T* bq = b + (p + 1) * n;
        const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
        const T w0 = a0[p + 1], w1 = a1[p + 1], w2 = a2[p + 1], w3 = a3[p + 1];
        for (std::size_t j = 0; j < n; ++j) {
            const T bj = bp[j], bk = bq[j];
            c0[j] += v0 * bj + w0 * bk;
            c1[j] += v1 * bj + w1 * bk;
            c2[j] += v2 * bj + w2 * bk;
            c3[j] += v3 * bj + w3 * bk;
        }
    }
    for (; p < k; ++p) {
        const T* bp = b + p * n;
        const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
        for (std::size_t j = 0; j < n; ++j) {
            const T bj = bp[j];
            c0[j] += v0 * bj;
            c1[j] += v1 * bj;
            c2[j] += v2 * bj;
            c3[j] += v3 * bj;
        }
    }
}

// C[m x n] = A[m x k] * B[k x n] + C0. Tail rows (m % 4) run through the same
// four-lane kernel with duplicated inputs and scratch outputs, keeping every
// row's arithmetic bit-identical to the blocked path; permuting batch rows
// therefore permutes results exactly.
template <typename T>
void gemm_accumulate(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4)
        gemm_block4(a + (i + 0) * k, a + (i + 1) * k, a + (i + 2) * k, a + (i + 3) * k,
                    c + (i + 0) * n, c + (i + 1) * n, c + (i + 2) * n, c + (i + 3) * n, b, k, n);
    const std::size_t rem = m - i;
    if (rem) {
        std::vector<T> scratch(3 * n, T(0));
        const T* ar[4];
        T* cr[4];
        for (std::size_t r = 0; r < 4; ++r) {
            ar[r] = a + (i + (r < rem ? r : rem - 1)) * k;
            cr[r] = r < rem ? c + (i + r) * n : scratch.data() + (r - rem) * n;
        }
        gemm_block4(ar[0], ar[1], ar[2], ar[3], cr[0], cr[1], cr[2], cr[3], b, k, n);
    }
}

// C = A * B
template <typename T>
void gemm(const MatT<T>& A, const MatT<T>& B, MatT<T>& C) {
    if (A.cols != B.rows) throw DataError("gemm: inner dimensions disagree");
    C.resize(A.rows, B.cols);
    C.fill(T(0));
    gemm_accumulate(A.data.data(), B.data.data(), C.data.data(), A.rows, A.cols, B.cols);
}

// C[k x n] += A^T[k x m] * B[m x n]; A is m x k. Row i of A scales row i of B
// into the k output rows, so this is the same saxpy pattern with A transposed
// on the fly.
template <typename T>
void gemm_at_b_accumulate(const MatT<T>& A, const MatT<T>& B, MatT<T>& C) {
    if (A.rows != B.rows) throw DataError("gemm_at_b: row counts disagree");
    detail::check_shapes(C.rows, C.cols, A.cols, B.cols, "gemm_at_b");
    const std::size_t m = A.rows, k = A.cols, n = B.cols;
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = A.row(i);
        const T* bi = B.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const T v = ai[p];
            T* cp = C.row(p);
            for (std::size_t j = 0; j < n; ++j) cp[j] += v * bi[j];
        }
    }
}

// C[m x k] = A[m x n] * B^T[n x k]; B is k x n. Dot products over unit-stride
// rows of A and B.
template <typename T>
void gemm_a_bt(const MatT<T>& A, const MatT<T>& B, MatT<T>& C) {
    if (A.cols != B.cols) throw DataError("gemm_a_bt: inner dimensions disagree");
    C.resize(A.rows, B.rows);
    const std::size_t m = A.rows, n = A.cols, k = B.rows;
    for (std::size_t i = 0; i < m; ++i) {
        const T* ai = A.row(i);
        T* ci = C.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const T* bp = B.row(p);
            T acc = T(0);
            for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
            ci[p] = acc;
        }
    }
}

} // namespace aemu
