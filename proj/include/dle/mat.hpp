#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dle {

using Vec = std::vector<double>;

/// Dense row-major matrix. Biases are stored as 1xN matrices so every
/// learnable parameter in the project is a Matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return a.size(); }

    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.a); }

/// y = x * W  (x treated as a row vector, W is in x out).
void matvec(const Matrix& w, const Vec& x, Vec& y);
/// y = g * W^T  (push a row-vector gradient back through W).
void matvec_transposed(const Matrix& w, const Vec& g, Vec& y);
/// W += outer(x, g), the weight gradient of y = x * W.
void add_outer(Matrix& w, const Vec& x, const Vec& g);

inline void add_scaled(Vec& dst, const Vec& src, double s) {
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

inline double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0) a += 2.0 * M_PI;
    double w = a - M_PI;
    // map -pi to +pi so the range is (-pi, pi]
    return (w == -M_PI) ? M_PI : w;
}

/// Deterministic RNG used everywhere. Thin wrapper over mt19937_64 with
/// explicit sampling helpers so streams are reproducible bit-for-bit.
class Rng {
  public:
    explicit Rng(uint64_t seed = 0) { seed_with(seed); }

    void seed_with(uint64_t seed) {
        state_ = seed ? seed : 0x9e3779b97f4a7c15ULL;
        // splitmix64 to spread weak seeds before seeding the engine
        for (int i = 0; i < 4; ++i) next_split();
        engine_seed_ = state_;
        x_ = engine_seed_;
        have_gauss_ = false;
    }

    /// xoshiro-free: we keep a splitmix64 stream; deterministic and portable.
    uint64_t next_u64() {
        x_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = x_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (have_gauss_) {
            have_gauss_ = false;
            return gauss_;
        }
        // Box-Muller
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        gauss_ = r * std::sin(2.0 * M_PI * u2);
        have_gauss_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    /// Derive an independent stream (for per-episode / per-worker rngs).
    Rng fork(uint64_t index) const {
        Rng r;
        r.x_ = x_ ^ (0xd1342543de82ef95ULL * (index + 1));
        r.have_gauss_ = false;
        return r;
    }

    std::string serialize() const {
        std::ostringstream os;
        os << x_ << " " << (have_gauss_ ? 1 : 0) << " " << gauss_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        int hg = 0;
        is >> x_ >> hg >> gauss_;
        if (is.fail()) throw std::invalid_argument("Rng::deserialize: bad state string");
        have_gauss_ = hg != 0;
    }

  private:
    void next_split() {
        state_ += 0x9e3779b97f4a7c15ULL;
    }

    uint64_t state_ = 0;
    uint64_t engine_seed_ = 0;
    uint64_t x_ = 0;
    bool have_gauss_ = false;
    double gauss_ = 0.0;
};

/// FNV-1a 64-bit, used for config snapshot provenance hashes.
inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(uint64_t v);

}  // namespace dle
