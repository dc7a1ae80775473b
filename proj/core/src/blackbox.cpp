#include "pcnn/blackbox.hpp"

#include <cmath>
#include <random>

#include "pcnn/errors.hpp"

namespace pcnn {

void BlackBoxConfig::validate() const {
    if (input_dim < 1 || encoder_width < 1 || recurrent_width < 1 || recurrent_layers < 1 ||
        decoder_width < 1 || output_dim < 1)
        throw ConfigError("blackbox: all widths must be >= 1");
}

BlackBoxNet::BlackBoxNet(const BlackBoxConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    auto add = [&](const std::string& name, std::size_t rows, std::size_t cols, bool random) {
        TensorData t;
        t.rows = rows;
        t.cols = cols;
        t.v.assign(rows * cols, 0.0);
        if (random) {
            double bound = 1.0 / std::sqrt(static_cast<double>(cols));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& w : t.v) w = dist(rng);
        }
        tensors_.emplace_back(name, std::move(t));
    };

    add("enc.W", cfg_.encoder_width, cfg_.input_dim, true);
    add("enc.b", cfg_.encoder_width, 1, false);

    std::size_t in = cfg_.encoder_width;
    for (std::size_t l = 0; l < cfg_.recurrent_layers; ++l) {
        std::string p = "rec" + std::to_string(l) + ".";
        const std::size_t w = cfg_.recurrent_width;
        std::vector<const char*> gates = cfg_.cell == CellKind::Gru
                                             ? std::vector<const char*>{"z", "r", "h"}
                                             : std::vector<const char*>{"i", "f", "o", "g"};
        for (const char* gname : gates) {
            add(p + "W" + gname, w, in, true);
            add(p + "U" + gname, w, w, true);
            add(p + "b" + gname, w, 1, false);
        }
        in = w;
    }

    add("norm.gamma", cfg_.recurrent_width, 1, false);
    add("norm.beta", cfg_.recurrent_width, 1, false);
    tensor("norm.gamma").v.assign(cfg_.recurrent_width, 1.0);

    add("dec.W1", cfg_.decoder_width, cfg_.recurrent_width, true);
    add("dec.b1", cfg_.decoder_width, 1, false);
    add("dec.W2", cfg_.output_dim, cfg_.decoder_width, true);
    add("dec.b2", cfg_.output_dim, 1, false);

    norm_mean_.assign(cfg_.recurrent_width, 0.0);
    norm_var_.assign(cfg_.recurrent_width, 1.0);
}

void BlackBoxNet::for_each_tensor(
    const std::function<void(const std::string&, TensorData&)>& fn) {
    for (auto& [name, t] : tensors_) fn(name, t);
}

void BlackBoxNet::for_each_tensor(
    const std::function<void(const std::string&, const TensorData&)>& fn) const {
    for (const auto& [name, t] : tensors_) fn(name, t);
}

TensorData& BlackBoxNet::tensor(const std::string& name) {
    for (auto& [n, t] : tensors_)
        if (n == name) return t;
    throw ConfigError("blackbox: unknown tensor " + name);
}

std::size_t BlackBoxNet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors_) n += t.v.size();
    return n;
}

void BlackBoxNet::set_norm_stats(std::vector<double> mean, std::vector<double> var) {
    if (mean.size() != cfg_.recurrent_width || var.size() != cfg_.recurrent_width)
        throw ConfigError("blackbox: normalization stats length mismatch");
    norm_mean_ = std::move(mean);
    norm_var_ = std::move(var);
}

void BlackBoxNet::update_norm_stats(const std::vector<std::vector<double>>& pre_norm,
                                    double momentum) {
    if (pre_norm.empty()) return;
    const std::size_t w = cfg_.recurrent_width;
    std::vector<double> mean(w, 0.0), var(w, 0.0);
    for (const auto& h : pre_norm)
        for (std::size_t i = 0; i < w; ++i) mean[i] += h[i];
    for (double& x : mean) x /= static_cast<double>(pre_norm.size());
    for (const auto& h : pre_norm)
        for (std::size_t i = 0; i < w; ++i) {
            double d = h[i] - mean[i];
            var[i] += d * d;
        }
    for (double& x : var) x /= static_cast<double>(pre_norm.size());
    for (std::size_t i = 0; i < w; ++i) {
        norm_mean_[i] = momentum * norm_mean_[i] + (1.0 - momentum) * mean[i];
        norm_var_[i] = momentum * norm_var_[i] + (1.0 - momentum) * var[i];
    }
}

BoundNet BlackBoxNet::bind(ad::Tape& tape, const std::string& prefix) const {
    BoundNet bn;
    bn.net_ = this;
    bn.tape_ = &tape;
    bn.prefix_ = prefix;
    for (const auto& [name, t] : tensors_)
        bn.leaves_.emplace_back(prefix + name, tape.leaf(t.v, t.rows, t.cols));
    const std::size_t w = cfg_.recurrent_width;
    std::vector<double> inv_std(w);
    for (std::size_t i = 0; i < w; ++i) inv_std[i] = 1.0 / std::sqrt(norm_var_[i] + 1e-8);
    bn.norm_inv_std_ = tape.constant(std::move(inv_std));
    bn.norm_mean_c_ = tape.constant(norm_mean_);
    return bn;
}

ad::Var BoundNet::leaf(const std::string& name) const {
    std::string full = prefix_ + name;
    for (const auto& [n, v] : leaves_)
        if (n == full) return v;
    throw ConfigError("blackbox: unbound tensor " + full);
}

RecurrentState BoundNet::initial_state(ad::Tape& tape) const {
    RecurrentState st;
    const auto& cfg = net_->cfg_;
    for (std::size_t l = 0; l < cfg.recurrent_layers; ++l) {
        st.h.push_back(tape.constant(std::vector<double>(cfg.recurrent_width, 0.0)));
        if (cfg.cell == CellKind::Lstm)
            st.cell.push_back(tape.constant(std::vector<double>(cfg.recurrent_width, 0.0)));
    }
    return st;
}

ad::Var BoundNet::step(ad::Var x, RecurrentState& state) const {
    const auto& cfg = net_->cfg_;
    if (x.size() != cfg.input_dim) throw NumericError("blackbox: feature vector length mismatch");
    ad::Tape& tape = *tape_;

    ad::Var in = ad::tanh(ad::add(ad::matvec(leaf("enc.W"), x), leaf("enc.b")));

    for (std::size_t l = 0; l < cfg.recurrent_layers; ++l) {
        std::string p = "rec" + std::to_string(l) + ".";
        ad::Var h = state.h[l];
        auto gate = [&](const char* g, ad::Var hin) {
            return ad::add(ad::add(ad::matvec(leaf(p + "W" + g), in),
                                   ad::matvec(leaf(p + "U" + g), hin)),
                           leaf(p + "b" + g));
        };
        if (cfg.cell == CellKind::Gru) {
            ad::Var z = ad::sigmoid(gate("z", h));
            ad::Var r = ad::sigmoid(gate("r", h));
            ad::Var hh = ad::tanh(ad::add(ad::add(ad::matvec(leaf(p + "Wh"), in),
                                                  ad::matvec(leaf(p + "Uh"), ad::mul(r, h))),
                                          leaf(p + "bh")));
            h = ad::add(h, ad::mul(z, ad::sub(hh, h)));
        } else {
            ad::Var i = ad::sigmoid(gate("i", h));
            ad::Var f = ad::sigmoid(gate("f", h));
            ad::Var o = ad::sigmoid(gate("o", h));
            ad::Var g = ad::tanh(gate("g", h));
            ad::Var c = ad::add(ad::mul(f, state.cell[l]), ad::mul(i, g));
            state.cell[l] = c;
            h = ad::mul(o, ad::tanh(c));
        }
        state.h[l] = h;
        in = h;
    }

    pre_norm_.push_back(in);
    ad::Var normed = ad::add(
        ad::mul(leaf("norm.gamma"), ad::mul(ad::sub(in, norm_mean_c_), norm_inv_std_)),
        leaf("norm.beta"));

    ad::Var d = ad::tanh(ad::add(ad::matvec(leaf("dec.W1"), normed), leaf("dec.b1")));
    return ad::add(ad::matvec(leaf("dec.W2"), d), leaf("dec.b2"));
}

}  // namespace pcnn
