#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace cdtd {

// Dense row-major matrix. Vectors are 1 x n.
template <typename T>
struct Mat {
    std::vector<T> v;
    int rows = 0;
    int cols = 0;

    Mat() = default;
    Mat(int r, int c) { resize(r, c); }

    void resize(int r, int c) {
        rows = r;
        cols = c;
        v.assign(static_cast<size_t>(r) * c, T(0));
    }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }
    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    T* operator[](int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const T* operator[](int r) const { return v.data() + static_cast<size_t>(r) * cols; }
};

// C = A * W (or += with accumulate), A: BxM, W: MxN, C: BxN
template <typename T>
void matmul(const Mat<T>& A, const Mat<T>& W, Mat<T>& C, bool accumulate = false) {
    assert(A.cols == W.rows && C.rows == A.rows && C.cols == W.cols);
    if (!accumulate) C.zero();
    for (int b = 0; b < A.rows; ++b) {
        const T* a = A[b];
        T* c = C[b];
        for (int m = 0; m < A.cols; ++m) {
            const T am = a[m];
            if (am == T(0)) continue;
            const T* w = W[m];
            for (int n = 0; n < W.cols; ++n) c[n] += am * w[n];
        }
    }
}

// dW += A^T * dC, A: BxM, dC: BxN, dW: MxN
template <typename T>
void matmul_acc_weight_grad(const Mat<T>& A, const Mat<T>& dC, Mat<T>& dW) {
    assert(A.rows == dC.rows && dW.rows == A.cols && dW.cols == dC.cols);
    for (int b = 0; b < A.rows; ++b) {
        const T* a = A[b];
        const T* dc = dC[b];
        for (int m = 0; m < A.cols; ++m) {
            const T am = a[m];
            if (am == T(0)) continue;
            T* dw = dW[m];
            for (int n = 0; n < dC.cols; ++n) dw[n] += am * dc[n];
        }
    }
}

// dA += dC * W^T, dC: BxN, W: MxN, dA: BxM
template <typename T>
void matmul_acc_input_grad(const Mat<T>& dC, const Mat<T>& W, Mat<T>& dA) {
    assert(dC.rows == dA.rows && W.rows == dA.cols && W.cols == dC.cols);
    for (int b = 0; b < dC.rows; ++b) {
        const T* dc = dC[b];
        T* da = dA[b];
        for (int m = 0; m < W.rows; ++m) {
            const T* w = W[m];
            T s = T(0);
            for (int n = 0; n < W.cols; ++n) s += dc[n] * w[n];
            da[m] += s;
        }
    }
}

// db += column sums of dC
template <typename T>
void acc_bias_grad(const Mat<T>& dC, Mat<T>& db) {
    assert(db.rows == 1 && db.cols == dC.cols);
    T* d = db[0];
    for (int b = 0; b < dC.rows; ++b) {
        const T* dc = dC[b];
        for (int n = 0; n < dC.cols; ++n) d[n] += dc[n];
    }
}

}  // namespace cdtd
