#include "dle/nn.hpp"

#include <nlohmann/json.hpp>

#include "dle/log.hpp"

namespace dle {

using nlohmann::json;

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + name);
}

DenseNet::DenseNet(std::vector<int> layer_sizes, std::vector<Activation> activations)
    : sizes_(std::move(layer_sizes)), acts_(std::move(activations)) {
    if (sizes_.size() < 2)
        throw std::invalid_argument("DenseNet: need at least input and output layer sizes");
    if (acts_.size() != sizes_.size() - 1)
        throw std::invalid_argument("DenseNet: activations count " + std::to_string(acts_.size()) +
                                    " != layer count " + std::to_string(sizes_.size() - 1));
    for (int s : sizes_)
        if (s <= 0) throw std::invalid_argument("DenseNet: layer sizes must be positive");
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
        w_.emplace_back(sizes_[l], sizes_[l + 1]);
        b_.emplace_back(1, sizes_[l + 1]);
    }
}

void DenseNet::init_params(Rng& rng) {
    for (size_t l = 0; l < w_.size(); ++l) {
        double bound = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
        for (auto& x : w_[l].a) x = rng.uniform(-bound, bound);
        b_[l].fill(0.0);
    }
}

Vec DenseNet::forward(const Vec& input) const {
    DenseTrace t;
    return forward(input, t);
}

Vec DenseNet::forward(const Vec& input, DenseTrace& trace) const {
    if (static_cast<int>(input.size()) != input_size())
        throw std::invalid_argument("DenseNet::forward: input size " + std::to_string(input.size()) +
                                    " != layer 0 size " + std::to_string(input_size()));
    trace.inputs.assign(w_.size() + 1, {});
    trace.pre.assign(w_.size(), {});
    trace.inputs[0] = input;
    Vec cur = input;
    for (size_t l = 0; l < w_.size(); ++l) {
        Vec pre;
        matvec(w_[l], cur, pre);
        for (int c = 0; c < w_[l].cols; ++c) pre[static_cast<size_t>(c)] += b_[l].a[static_cast<size_t>(c)];
        trace.pre[l] = pre;
        Vec out(pre.size());
        for (size_t i = 0; i < pre.size(); ++i) out[i] = act_apply(acts_[l], pre[i]);
        trace.inputs[l + 1] = out;
        cur = std::move(out);
    }
    trace.valid = true;
    return cur;
}

NetGrads DenseNet::backward(const DenseTrace& trace, const Vec& output_grad, Vec* input_grad) const {
    if (!trace.valid)
        throw std::invalid_argument("DenseNet::backward: no matching forward trace");
    if (static_cast<int>(output_grad.size()) != output_size())
        throw std::invalid_argument("DenseNet::backward: output_grad size " +
                                    std::to_string(output_grad.size()) + " != output size " +
                                    std::to_string(output_size()));
    NetGrads grads = zero_grads();
    Vec g = output_grad;
    for (int l = layer_count() - 1; l >= 0; --l) {
        const Vec& pre = trace.pre[static_cast<size_t>(l)];
        Vec dpre(g.size());
        for (size_t i = 0; i < g.size(); ++i) dpre[i] = g[i] * act_deriv(acts_[static_cast<size_t>(l)], pre[i]);
        // grads ordered [W0, b0, W1, b1, ...]
        add_outer(grads.g[static_cast<size_t>(2 * l)], trace.inputs[static_cast<size_t>(l)], dpre);
        add_scaled(grads.g[static_cast<size_t>(2 * l + 1)].a, dpre, 1.0);
        Vec gin;
        matvec_transposed(w_[static_cast<size_t>(l)], dpre, gin);
        g = std::move(gin);
    }
    if (input_grad) *input_grad = g;
    return grads;
}

NetGrads DenseNet::zero_grads() const {
    NetGrads grads;
    for (size_t l = 0; l < w_.size(); ++l) {
        grads.g.emplace_back(w_[l].rows, w_[l].cols);
        grads.g.emplace_back(1, b_[l].cols);
    }
    return grads;
}

std::vector<Matrix*> DenseNet::params() {
    std::vector<Matrix*> p;
    for (size_t l = 0; l < w_.size(); ++l) {
        p.push_back(&w_[l]);
        p.push_back(&b_[l]);
    }
    return p;
}

std::vector<const Matrix*> DenseNet::params() const {
    std::vector<const Matrix*> p;
    for (size_t l = 0; l < w_.size(); ++l) {
        p.push_back(&w_[l]);
        p.push_back(&b_[l]);
    }
    return p;
}

size_t DenseNet::param_count() const {
    size_t n = 0;
    for (size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
    return n;
}

std::string DenseNet::to_json_string() const {
    json j;
    j["format_version"] = 1;
    j["layer_sizes"] = sizes_;
    std::vector<std::string> acts;
    for (auto a : acts_) acts.emplace_back(activation_name(a));
    j["activations"] = acts;
    json weights = json::array();
    json biases = json::array();
    for (size_t l = 0; l < w_.size(); ++l) {
        weights.push_back(w_[l].a);
        biases.push_back(b_[l].a);
    }
    j["weights_row_major"] = weights;
    j["biases"] = biases;
    return j.dump();
}

DenseNet DenseNet::from_json_string(const std::string& s) {
    json j = json::parse(s);
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw std::invalid_argument("DenseNet: unsupported checkpoint format version");
    std::vector<int> sizes = j.at("layer_sizes").get<std::vector<int>>();
    std::vector<Activation> acts;
    for (const auto& name : j.at("activations")) acts.push_back(activation_from_name(name.get<std::string>()));
    DenseNet net(sizes, acts);
    const auto& weights = j.at("weights_row_major");
    const auto& biases = j.at("biases");
    if (weights.size() != net.w_.size() || biases.size() != net.b_.size())
        throw std::invalid_argument("DenseNet: checkpoint layer count mismatch");
    for (size_t l = 0; l < net.w_.size(); ++l) {
        auto wv = weights[l].get<std::vector<double>>();
        auto bv = biases[l].get<std::vector<double>>();
        if (wv.size() != net.w_[l].size() || bv.size() != net.b_[l].size())
            throw std::invalid_argument("DenseNet: checkpoint shape mismatch at layer " + std::to_string(l));
        net.w_[l].a = std::move(wv);
        net.b_[l].a = std::move(bv);
    }
    return net;
}

bool DenseNet::operator==(const DenseNet& o) const {
    if (sizes_ != o.sizes_ || acts_ != o.acts_) return false;
    for (size_t l = 0; l < w_.size(); ++l)
        if (w_[l].a != o.w_[l].a || b_[l].a != o.b_[l].a) return false;
    return true;
}

bool Adam::step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
    if (params.size() != grads.size())
        throw std::invalid_argument("Adam::step: params/grads count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(grads[i]))
            throw std::invalid_argument("Adam::step: shape mismatch at parameter " + std::to_string(i));
        if (!all_finite(grads[i])) {
            ++skipped;
            logf(LogLevel::Warn, "Adam: non-finite gradient at parameter %zu, update skipped", i);
            return false;
        }
    }
    if (m.empty()) {
        for (const auto* p : params) {
            m.emplace_back(p->rows, p->cols);
            v.emplace_back(p->rows, p->cols);
        }
    }
    ++step_count;
    double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& pm = m[i].a;
        auto& pv = v[i].a;
        auto& pa = params[i]->a;
        const auto& ga = grads[i].a;
        for (size_t k = 0; k < pa.size(); ++k) {
            pm[k] = beta1 * pm[k] + (1.0 - beta1) * ga[k];
            pv[k] = beta2 * pv[k] + (1.0 - beta2) * ga[k] * ga[k];
            double mhat = pm[k] / c1;
            double vhat = pv[k] / c2;
            pa[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    return true;
}

}  // namespace dle
