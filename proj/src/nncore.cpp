// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "binary_io.hpp"
#include "framesel/errors.hpp"

namespace framesel {

namespace {

constexpr std::string_view kParamMagic = "SMRTPRM1";

std::string shape_str(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + " must be " + shape_str(rows, cols) + ", got " +
                             shape_str(m.rows(), m.cols()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                             shape_str(rows, cols));
    }
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::squared_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

// ---------------------------------------------------------------------------
// Rng

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw DomainError("uniform_index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_string(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// ParamStore

Matrix& ParamStore::add(const std::string& name, Matrix init) {
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    Entry e;
    e.grad = Matrix(init.rows(), init.cols());
    e.velocity = Matrix(init.rows(), init.cols());
    e.value = std::move(init);
    return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, _] : entries_) out.push_back(name);
    return out;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

void ParamStore::zero_velocity() {
    for (auto& [_, e] : entries_) e.velocity.fill(0.0);
}

bool ParamStore::same_values(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end(); ++a, ++b) {
        if (a->first != b->first || !(a->second.value == b->second.value)) return false;
    }
    return true;
}

std::string encode_params(const ParamStore& params) {
    detail::ByteWriter w;
    w.bytes(kParamMagic);
    w.u32(static_cast<std::uint32_t>(params.entry_count()));
    for (const auto& [name, e] : params.entries()) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(e.value.rows()));
        w.u32(static_cast<std::uint32_t>(e.value.cols()));
        for (double v : e.value.data()) w.f64(v);
    }
    return w.take();
}

ParamStore decode_params(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < kParamMagic.size() || r.bytes(kParamMagic.size()) != kParamMagic) {
        throw FormatError("bad parameter file magic", 0);
    }
    ParamStore params;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t name_at = r.offset();
        std::string name = r.str();
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        if (n > r.remaining() / 8) throw FormatError("payload of '" + name + "' exceeds file size", r.offset());
        std::vector<double> data(n);
        for (auto& v : data) v = r.f64();
        if (params.contains(name)) throw FormatError("duplicate parameter '" + name + "'", name_at);
        Matrix m(rows, cols, std::move(data));
        if (!m.all_finite()) throw DataError("parameter '" + name + "' has non-finite entries");
        params.add(name, std::move(m));
    }
    r.expect_end();
    return params;
}

void save_params(const ParamStore& params, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_params(params));
}

ParamStore load_params(const std::filesystem::path& path) { return decode_params(detail::read_file(path)); }

Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = rng.uniform(-bound, bound);
    return m;
}

// ---------------------------------------------------------------------------
// Kernels

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vector dense_forward(std::span<const double> x, const Matrix& weights, const Matrix& bias) {
    if (weights.rows() != x.size()) {
        throw DimensionError("dense_forward: input 1x" + std::to_string(x.size()) + " vs weights " +
                             shape_str(weights.rows(), weights.cols()));
    }
    if (bias.rows() != 1 || bias.cols() != weights.cols()) {
        throw DimensionError("dense_forward: weights " + shape_str(weights.rows(), weights.cols()) + " vs bias " +
                             shape_str(bias.rows(), bias.cols()));
    }
    Vector out(bias.data().begin(), bias.data().end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        auto wrow = weights.row(i);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += xi * wrow[k];
    }
    return out;
}

Matrix dense_forward(const Matrix& x, const Matrix& weights, const Matrix& bias) {
    if (x.rows() != 1) throw DimensionError("dense_forward: input must be a row vector, got " + shape_str(x.rows(), x.cols()));
    auto out = dense_forward(x.data(), weights, bias);
    const std::size_t width = out.size();
    return Matrix(1, width, std::move(out));
}

Vector dense_backward(std::span<const double> x, const Matrix& weights, std::span<const double> dout,
                      Matrix& weights_grad, Matrix& bias_grad) {
    Vector dx(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto wrow = weights.row(i);
        auto grow = weights_grad.row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < dout.size(); ++k) {
            grow[k] += x[i] * dout[k];
            acc += wrow[k] * dout[k];
        }
        dx[i] = acc;
    }
    auto bg = bias_grad.data();
    for (std::size_t k = 0; k < dout.size(); ++k) bg[k] += dout[k];
    return dx;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid(std::span<const double> values) {
    Vector out(values.size());
    std::transform(values.begin(), values.end(), out.begin(), [](double v) { return sigmoid(v); });
    return out;
}

Vector softmax(std::span<const double> logits) {
    if (logits.empty()) throw DomainError("softmax of an empty vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        total += out[i];
    }
    for (auto& v : out) v /= total;
    return out;
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) throw DomainError("log_sum_exp of an empty vector");
    const double mx = *std::max_element(values.begin(), values.end());
    double total = 0.0;
    for (double v : values) total += std::exp(v - mx);
    return mx + std::log(total);
}

// ---------------------------------------------------------------------------
// LSTM

LstmWeights LstmWeights::from(const ParamStore& params, const std::string& prefix) {
    return {params.value(prefix + ".Wx"), params.value(prefix + ".Wh"), params.value(prefix + ".b")};
}

LstmGradRefs LstmGradRefs::from(ParamStore& params, const std::string& prefix) {
    return {params.grad(prefix + ".Wx"), params.grad(prefix + ".Wh"), params.grad(prefix + ".b")};
}

void add_lstm_params(ParamStore& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden,
                     Rng& rng) {
    params.add(prefix + ".Wx", uniform_init(input_dim, 4 * hidden, input_dim, rng));
    params.add(prefix + ".Wh", uniform_init(hidden, 4 * hidden, hidden, rng));
    Matrix bias(1, 4 * hidden);
    for (std::size_t j = 0; j < hidden; ++j) bias(0, hidden + j) = 1.0;
    params.add(prefix + ".b", std::move(bias));
}

void lstm_step(std::span<const double> input, std::span<const double> h_prev, std::span<const double> m_prev,
               const LstmWeights& w, LstmCache& cache) {
    const std::size_t ch = w.hidden();
    if (w.recurrent.cols() != 4 * ch || w.input.cols() != 4 * ch || w.input.rows() != input.size()) {
        throw DimensionError("lstm_step: input 1x" + std::to_string(input.size()) + " vs Wx " +
                             shape_str(w.input.rows(), w.input.cols()) + " / Wh " +
                             shape_str(w.recurrent.rows(), w.recurrent.cols()));
    }
    if (h_prev.size() != ch || m_prev.size() != ch) {
        throw DimensionError("lstm_step: state sizes " + std::to_string(h_prev.size()) + "/" +
                             std::to_string(m_prev.size()) + " vs hidden " + std::to_string(ch));
    }
    if (w.bias.size() != 4 * ch) throw DimensionError("lstm_step: bias must be 1x" + std::to_string(4 * ch));

    Vector pre = dense_forward(input, w.input, w.bias);
    for (std::size_t i = 0; i < ch; ++i) {
        const double hi = h_prev[i];
        if (hi == 0.0) continue;
        auto row = w.recurrent.row(i);
        for (std::size_t k = 0; k < 4 * ch; ++k) pre[k] += hi * row[k];
    }

    cache.x.assign(input.begin(), input.end());
    cache.h_prev.assign(h_prev.begin(), h_prev.end());
    cache.m_prev.assign(m_prev.begin(), m_prev.end());
    cache.in_gate.resize(ch);
    cache.forget_gate.resize(ch);
    cache.out_gate.resize(ch);
    cache.candidate.resize(ch);
    cache.m.resize(ch);
    cache.tanh_m.resize(ch);
    cache.h.resize(ch);
    for (std::size_t j = 0; j < ch; ++j) {
        cache.in_gate[j] = sigmoid(pre[j]);
        cache.forget_gate[j] = sigmoid(pre[ch + j]);
        cache.out_gate[j] = sigmoid(pre[2 * ch + j]);
        cache.candidate[j] = std::tanh(pre[3 * ch + j]);
        cache.m[j] = cache.forget_gate[j] * m_prev[j] + cache.in_gate[j] * cache.candidate[j];
        cache.tanh_m[j] = std::tanh(cache.m[j]);
        cache.h[j] = cache.out_gate[j] * cache.tanh_m[j];
    }
}

LstmState lstm_step(const Matrix& input, const Matrix& h_prev, const Matrix& m_prev, const LstmWeights& w) {
    require_shape(input, 1, w.input.rows(), "lstm_step input");
    require_shape(h_prev, 1, w.hidden(), "lstm_step h_prev");
    require_shape(m_prev, 1, w.hidden(), "lstm_step m_prev");
    LstmCache cache;
    lstm_step(input.data(), h_prev.data(), m_prev.data(), w, cache);
    return {Matrix::row_vector(cache.h), Matrix::row_vector(cache.m)};
}

void lstm_step_backward(const LstmCache& c, const LstmWeights& w, std::span<const double> dh,
                        std::span<const double> dm, LstmGradRefs grads, Vector& dx, Vector& dh_prev,
                        Vector& dm_prev) {
    const std::size_t ch = w.hidden();
    Vector dpre(4 * ch);
    dm_prev.assign(ch, 0.0);
    for (std::size_t j = 0; j < ch; ++j) {
        const double d_out = dh[j] * c.tanh_m[j];
        const double d_m = dm[j] + dh[j] * c.out_gate[j] * (1.0 - c.tanh_m[j] * c.tanh_m[j]);
        const double d_in = d_m * c.candidate[j];
        const double d_cand = d_m * c.in_gate[j];
        const double d_forget = d_m * c.m_prev[j];
        dm_prev[j] = d_m * c.forget_gate[j];
        dpre[j] = d_in * c.in_gate[j] * (1.0 - c.in_gate[j]);
        dpre[ch + j] = d_forget * c.forget_gate[j] * (1.0 - c.forget_gate[j]);
        dpre[2 * ch + j] = d_out * c.out_gate[j] * (1.0 - c.out_gate[j]);
        dpre[3 * ch + j] = d_cand * (1.0 - c.candidate[j] * c.candidate[j]);
    }
    dx = dense_backward(c.x, w.input, dpre, grads.input, grads.bias);
    // Recurrent weights have no bias of their own; route the bias gradient to a scratch buffer.
    Matrix scratch(1, 4 * ch);
    dh_prev = dense_backward(c.h_prev, w.recurrent, dpre, grads.recurrent, scratch);
}

// ---------------------------------------------------------------------------
// Optimisation

GradCheckReport grad_check_report(const LossFn& loss_fn, ParamStore& params, double eps) {
    if (!(eps > 0.0)) throw DomainError("grad_check: eps must be positive");
    GradCheckReport report;
    params.zero_grad();
    report.base_loss = loss_fn(params);
    if (!std::isfinite(report.base_loss)) throw NumericError("grad_check: non-finite loss at base point");

    std::map<std::string, Matrix> analytic;
    for (auto& [name, e] : params.entries()) analytic.emplace(name, e.grad);

    for (auto& [name, e] : params.entries()) {
        const Matrix& a = analytic.at(name);
        auto values = e.value.data();
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double saved = values[k];
            values[k] = saved + eps;
            params.zero_grad();
            const double up = loss_fn(params);
            values[k] = saved - eps;
            params.zero_grad();
            const double down = loss_fn(params);
            values[k] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("grad_check: non-finite loss perturbing '" + name + "'[" + std::to_string(k) + "]");
            }
            GradCheckEntry entry{name, k, a.data()[k], (up - down) / (2.0 * eps), 0.0};
            entry.rel_error = std::abs(entry.analytic - entry.numeric) /
                              std::max(1e-8, std::abs(entry.analytic) + std::abs(entry.numeric));
            report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
            report.entries.push_back(std::move(entry));
        }
    }
    for (auto& [name, e] : params.entries()) e.grad = analytic.at(name);
    return report;
}

double grad_check(const LossFn& loss_fn, ParamStore& params, double eps) {
    return grad_check_report(loss_fn, params, eps).max_rel_error;
}

void sgd_momentum_step(ParamStore& params, double lr, double momentum) {
    for (auto& [_, e] : params.entries()) {
        auto v = e.velocity.data();
        auto g = e.grad.data();
        auto p = e.value.data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = momentum * v[k] + g[k];
            p[k] -= lr * v[k];
            g[k] = 0.0;
        }
    }
}

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.lr_step_epochs == 0) return cfg.lr;
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_step_epochs));
}

TrainReport run_sgd(ParamStore& params, std::size_t item_count, const TrainConfig& cfg, Rng& rng,
                    const ItemLossFn& item_loss, const EpochHook& on_epoch) {
    if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
    if (cfg.lr < 0.0) throw ConfigError("learning rate must be non-negative");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");

    TrainReport report;
    std::vector<std::size_t> order(item_count);
    for (std::size_t i = 0; i < item_count; ++i) order[i] = i;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (on_epoch) on_epoch(epoch);
        rng.shuffle(order);
        const double lr = scheduled_lr(cfg, epoch);
        double epoch_total = 0.0;
        for (std::size_t start = 0; start < item_count; start += cfg.batch_size) {
            const std::size_t end = std::min(item_count, start + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);
            params.zero_grad();
            double batch_total = 0.0;
            for (std::size_t i = start; i < end; ++i) batch_total += item_loss(order[i], scale);
            if (!std::isfinite(batch_total)) {
                throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step));
            }
            epoch_total += batch_total;
            sgd_momentum_step(params, lr, cfg.momentum);
            ++step;
        }
        report.epoch_loss.push_back(item_count ? epoch_total / static_cast<double>(item_count) : 0.0);
    }
    params.zero_grad();
    return report;
}

}  // namespace framesel
