#include "dle/mat.hpp"

#include <cstdio>

namespace dle {

void matvec(const Matrix& w, const Vec& x, Vec& y) {
    if (static_cast<int>(x.size()) != w.rows)
        throw std::invalid_argument("matvec: vector length " + std::to_string(x.size()) +
                                    " != matrix rows " + std::to_string(w.rows));
    y.assign(static_cast<size_t>(w.cols), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        double xr = x[static_cast<size_t>(r)];
        if (xr == 0.0) continue;
        const double* row = &w.a[static_cast<size_t>(r) * w.cols];
        for (int c = 0; c < w.cols; ++c) y[static_cast<size_t>(c)] += xr * row[c];
    }
}

void matvec_transposed(const Matrix& w, const Vec& g, Vec& y) {
    if (static_cast<int>(g.size()) != w.cols)
        throw std::invalid_argument("matvec_transposed: vector length " + std::to_string(g.size()) +
                                    " != matrix cols " + std::to_string(w.cols));
    y.assign(static_cast<size_t>(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
        const double* row = &w.a[static_cast<size_t>(r) * w.cols];
        double acc = 0.0;
        for (int c = 0; c < w.cols; ++c) acc += row[c] * g[static_cast<size_t>(c)];
        y[static_cast<size_t>(r)] = acc;
    }
}

void add_outer(Matrix& w, const Vec& x, const Vec& g) {
    if (static_cast<int>(x.size()) != w.rows || static_cast<int>(g.size()) != w.cols)
        throw std::invalid_argument("add_outer: shape mismatch");
    for (int r = 0; r < w.rows; ++r) {
        double xr = x[static_cast<size_t>(r)];
        if (xr == 0.0) continue;
        double* row = &w.a[static_cast<size_t>(r) * w.cols];
        for (int c = 0; c < w.cols; ++c) row[c] += xr * g[static_cast<size_t>(c)];
    }
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace dle
