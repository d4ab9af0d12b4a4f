#pragma once
#include <cassert>
#include <cstddef>
#include <vector>

namespace tureis {

using Vec = std::vector<double>;

// Dense row-major matrix; everything in this project is tiny (L=5, d=64),
// so naive loops are fast enough and keep the gradient code auditable.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    void zero() { a.assign(a.size(), 0.0); }
};

// C = A * B^T, A: m x k, B: n x k
inline Mat matmul_nt(const Mat& A, const Mat& B) {
    assert(A.cols == B.cols);
    Mat C(A.rows, B.rows);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < B.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += A(i, k) * B(j, k);
            C(i, j) = s;
        }
    return C;
}

// C = A * B, A: m x k, B: k x n
inline Mat matmul_nn(const Mat& A, const Mat& B) {
    assert(A.cols == B.rows);
    Mat C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int k = 0; k < A.cols; ++k) {
            double aik = A(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
        }
    return C;
}

// C += A^T * B, A: k x m, B: k x n  (gradient accumulation form)
inline void add_matmul_tn(Mat& C, const Mat& A, const Mat& B) {
    assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
    for (int k = 0; k < A.rows; ++k)
        for (int i = 0; i < A.cols; ++i) {
            double aki = A(k, i);
            if (aki == 0.0) continue;
            for (int j = 0; j < B.cols; ++j) C(i, j) += aki * B(k, j);
        }
}

} // namespace tureis
