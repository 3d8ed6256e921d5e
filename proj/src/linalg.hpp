#pragma once

#include <cmath>
#include <utility>
#include <vector>

namespace perciso::detail {

// Solves A x = b in place (row-major n x n). Returns false when |pivot| < eps.
inline bool solve_linear(std::vector<double> A, std::vector<double> b, int n, std::vector<double>& x,
                         double eps = 1e-12) {
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(A[r * n + c]) > std::abs(A[piv * n + c])) piv = r;
        if (std::abs(A[piv * n + c]) < eps) return false;
        if (piv != c) {
            for (int k = 0; k < n; ++k) std::swap(A[c * n + k], A[piv * n + k]);
            std::swap(b[c], b[piv]);
        }
        for (int r = c + 1; r < n; ++r) {
            double f = A[r * n + c] / A[c * n + c];
            if (f == 0.0) continue;
            for (int k = c; k < n; ++k) A[r * n + k] -= f * A[c * n + k];
            b[r] -= f * b[c];
        }
    }
    x.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < n; ++k) s -= A[r * n + k] * x[k];
        x[r] = s / A[r * n + r];
    }
    return true;
}

// Generalized cross product of d-1 vectors in R^d (cofactor expansion); zero when dependent.
inline std::vector<double> null_vector(const std::vector<std::vector<double>>& rows, int d) {
    std::vector<double> out(d, 0.0);
    std::vector<double> minor((d - 1) * (d - 1));
    for (int j = 0; j < d; ++j) {
        for (int r = 0; r < d - 1; ++r) {
            int cc = 0;
            for (int c = 0; c < d; ++c) {
                if (c == j) continue;
                minor[r * (d - 1) + cc++] = rows[r][c];
            }
        }
        // determinant by elimination
        std::vector<double> M(minor);
        int m = d - 1;
        double det = 1.0;
        for (int c = 0; c < m && det != 0.0; ++c) {
            int piv = c;
            for (int r = c + 1; r < m; ++r)
                if (std::abs(M[r * m + c]) > std::abs(M[piv * m + c])) piv = r;
            if (M[piv * m + c] == 0.0) {
                det = 0.0;
                break;
            }
            if (piv != c) {
                for (int k = 0; k < m; ++k) std::swap(M[c * m + k], M[piv * m + k]);
                det = -det;
            }
            det *= M[c * m + c];
            for (int r = c + 1; r < m; ++r) {
                double f = M[r * m + c] / M[c * m + c];
                for (int k = c; k < m; ++k) M[r * m + k] -= f * M[c * m + k];
            }
        }
        out[j] = ((j % 2) ? -1.0 : 1.0) * det;
    }
    return out;
}

// Calls fn(indices) for every k-subset of {0..n-1} in lexicographic order.
template <class Fn>
void for_each_subset(int n, int k, Fn&& fn) {
    if (k > n || k <= 0) return;
    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) pick[i] = i;
    while (true) {
        fn(pick);
        int i = k - 1;
        while (i >= 0 && pick[i] == n - k + i) --i;
        if (i < 0) return;
        ++pick[i];
        for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
}

}  // namespace perciso::detail
