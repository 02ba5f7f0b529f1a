#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dle/mat.hpp"

namespace dle {

enum class Activation { Relu, Tanh, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

inline double act_apply(Activation a, double x) {
    switch (a) {
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Identity: return x;
    }
    return x;
}

/// Derivative given the pre-activation value.
inline double act_deriv(Activation a, double pre) {
    switch (a) {
        case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

/// Cached intermediates of one forward pass, consumed by backward().
struct DenseTrace {
    std::vector<Vec> inputs;  // inputs[l] is the input to layer l; inputs[0] is the net input
    std::vector<Vec> pre;     // pre-activation of layer l
    bool valid = false;
};

/// Per-layer parameter gradients in the same order as DenseNet::params():
/// [W0, b0, W1, b1, ...].
struct NetGrads {
    std::vector<Matrix> g;

    void add(const NetGrads& o, double scale = 1.0) {
        for (size_t i = 0; i < g.size(); ++i) add_scaled(g[i].a, o.g[i].a, scale);
    }
    void scale(double s) {
        for (auto& m : g)
            for (auto& v : m.a) v *= s;
    }
    void zero() {
        for (auto& m : g) m.fill(0.0);
    }
};

/// Fully connected network. Weights are (in x out); forward treats vectors
/// as rows: y = act(x W + b).
class DenseNet {
  public:
    DenseNet() = default;
    DenseNet(std::vector<int> layer_sizes, std::vector<Activation> activations);

    /// Uniform fan-based init in +-sqrt(6/(fan_in+fan_out)); biases zero.
    void init_params(Rng& rng);

    Vec forward(const Vec& input) const;
    Vec forward(const Vec& input, DenseTrace& trace) const;

    /// Backpropagate output_grad through the cached pass. Returns parameter
    /// gradients and writes the input gradient if requested.
    NetGrads backward(const DenseTrace& trace, const Vec& output_grad, Vec* input_grad = nullptr) const;

    NetGrads zero_grads() const;

    std::vector<Matrix*> params();
    std::vector<const Matrix*> params() const;
    size_t param_count() const;

    int input_size() const { return sizes_.empty() ? 0 : sizes_.front(); }
    int output_size() const { return sizes_.empty() ? 0 : sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    const std::vector<Activation>& activations() const { return acts_; }

    Matrix& weight(int layer) { return w_[static_cast<size_t>(layer)]; }
    Matrix& bias(int layer) { return b_[static_cast<size_t>(layer)]; }
    const Matrix& weight(int layer) const { return w_[static_cast<size_t>(layer)]; }
    const Matrix& bias(int layer) const { return b_[static_cast<size_t>(layer)]; }
    int layer_count() const { return static_cast<int>(w_.size()); }

    std::string to_json_string() const;
    static DenseNet from_json_string(const std::string& s);

    bool operator==(const DenseNet& o) const;

  private:
    std::vector<int> sizes_;
    std::vector<Activation> acts_;
    std::vector<Matrix> w_;
    std::vector<Matrix> b_;  // 1 x out
};

/// Adam over an arbitrary list of Matrix parameters. Accumulator shapes are
/// created lazily to match the first step's parameter shapes.
struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step_count = 0;
    long long skipped = 0;
    std::vector<Matrix> m, v;

    explicit Adam(double lr_ = 3e-4) : lr(lr_) {}

    /// Applies one update. Non-finite gradients skip the whole update (the
    /// step counter does not advance) and return false.
    bool step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads);
};

}  // namespace dle
