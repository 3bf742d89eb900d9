// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace framesel {

using Vector = std::vector<double>;

/**
 * @brief Dense row-major matrix of doubles.
 *
 * Row vectors are 1 x K matrices. Every kernel in this library works in
 * 64-bit floating point.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// 1 x values.size() row vector.
    static Matrix row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    void fill(double value);
    bool all_finite() const;
    double squared_norm() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/**
 * @brief Deterministic random source.
 *
 * Backed by std::mt19937_64, whose output sequence is fixed by the C++
 * standard. The conversions to reals and bounded integers are written here
 * rather than taken from <random> distributions, whose algorithms are
 * implementation-defined.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n);
    /// Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

/// splitmix64 finalizer applied to a ^ rotated b; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
/// FNV-1a over the bytes of text.
std::uint64_t hash_string(std::string_view text);

/**
 * @brief Named parameters with matching gradient and momentum buffers.
 *
 * Names are kept in sorted order so iteration and serialization are
 * deterministic.
 */
class ParamStore {
public:
    struct Entry {
        Matrix value;
        Matrix grad;
        Matrix velocity;
    };

    /// Registers a parameter; throws ConfigError on a duplicate name.
    Matrix& add(const std::string& name, Matrix init);

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    Matrix& value(const std::string& name) { return entry(name).value; }
    const Matrix& value(const std::string& name) const { return entry(name).value; }
    Matrix& grad(const std::string& name) { return entry(name).grad; }
    const Matrix& grad(const std::string& name) const { return entry(name).grad; }
    Matrix& velocity(const std::string& name) { return entry(name).velocity; }

    std::vector<std::string> names() const;
    std::size_t scalar_count() const;
    std::size_t entry_count() const { return entries_.size(); }

    void zero_grad();
    void zero_velocity();

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    /// Compares parameter values only.
    bool same_values(const ParamStore& other) const;

private:
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;

    std::map<std::string, Entry> entries_;
};

/// Little-endian "SMRTPRM1" encoding of the parameter values (not gradients).
std::string encode_params(const ParamStore& params);
ParamStore decode_params(std::string_view bytes);
void save_params(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_params(const std::filesystem::path& path);

/// Weights ~ Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

// ---------------------------------------------------------------------------
// Kernels

/// out = x W + bias for a 1 x D input.
Matrix dense_forward(const Matrix& x, const Matrix& weights, const Matrix& bias);
Vector dense_forward(std::span<const double> x, const Matrix& weights, const Matrix& bias);

/// Accumulates dW += x^T dout and dbias += dout; returns dx = dout W^T.
Vector dense_backward(std::span<const double> x, const Matrix& weights, std::span<const double> dout,
                      Matrix& weights_grad, Matrix& bias_grad);

double sigmoid(double x);
Vector sigmoid(std::span<const double> values);

/// Max-subtracted softmax. Throws DomainError on empty input.
Vector softmax(std::span<const double> logits);
/// log(sum(exp(v))) computed stably. Throws DomainError on empty input.
double log_sum_exp(std::span<const double> values);

double dot(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// LSTM cell

/**
 * Standard LSTM with forget gate and no peepholes. The four gate blocks of
 * the weight matrices are laid out as [input | forget | output | candidate],
 * each of width hidden.
 */
struct LstmWeights {
    const Matrix& input;      ///< Din x 4Ch
    const Matrix& recurrent;  ///< Ch x 4Ch
    const Matrix& bias;       ///< 1 x 4Ch

    std::size_t hidden() const { return recurrent.rows(); }

    /// Reads "<prefix>.Wx", "<prefix>.Wh", "<prefix>.b".
    static LstmWeights from(const ParamStore& params, const std::string& prefix);
};

struct LstmGradRefs {
    Matrix& input;
    Matrix& recurrent;
    Matrix& bias;

    static LstmGradRefs from(ParamStore& params, const std::string& prefix);
};

/// Values retained from a forward step for the backward pass.
struct LstmCache {
    Vector x, h_prev, m_prev;
    Vector in_gate, forget_gate, out_gate, candidate;
    Vector m, tanh_m, h;
};

struct LstmState {
    Matrix h;
    Matrix m;
};

LstmState lstm_step(const Matrix& input, const Matrix& h_prev, const Matrix& m_prev, const LstmWeights& w);
/// Span form used by the sequence models; fills the cache.
void lstm_step(std::span<const double> input, std::span<const double> h_prev, std::span<const double> m_prev,
               const LstmWeights& w, LstmCache& cache);

/// Given dL/dh and dL/dm of this step, accumulates weight gradients and
/// writes dL/dx, dL/dh_prev, dL/dm_prev.
void lstm_step_backward(const LstmCache& cache, const LstmWeights& w, std::span<const double> dh,
                        std::span<const double> dm, LstmGradRefs grads, Vector& dx, Vector& dh_prev,
                        Vector& dm_prev);

/// Registers Wx, Wh, b for an LSTM under prefix; forget-gate bias starts at +1.
void add_lstm_params(ParamStore& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden,
                     Rng& rng);

// ---------------------------------------------------------------------------
// Optimisation

/// Evaluates the loss at the current parameters and accumulates its analytic
/// gradient into the store's gradient buffers.
using LossFn = std::function<double(ParamStore&)>;

struct GradCheckEntry {
    std::string name;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    double base_loss = 0.0;
    double max_rel_error = 0.0;
    std::vector<GradCheckEntry> entries;  ///< one per scalar parameter, in store order
};

/// Per-entry form of grad_check.
GradCheckReport grad_check_report(const LossFn& loss_fn, ParamStore& params, double eps);

/**
 * Central-difference gradient check over every scalar parameter.
 * Returns max |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
 * On return the gradient buffers hold the analytic gradient.
 */
double grad_check(const LossFn& loss_fn, ParamStore& params, double eps);

/// v <- momentum v + g; theta <- theta - lr v; g <- 0.
void sgd_momentum_step(ParamStore& params, double lr, double momentum);

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t lr_step_epochs = 25;  ///< lr is multiplied by lr_decay every lr_step_epochs
    double lr_decay = 0.1;
};

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch);

struct TrainReport {
    std::vector<double> epoch_loss;  ///< mean per-item loss of each epoch
};

/// Loss of one item; must accumulate scale * dLoss into the gradient buffers.
using ItemLossFn = std::function<double(std::size_t item, double scale)>;
/// Optional hook at the start of each epoch (e.g. to redraw random pairings).
using EpochHook = std::function<void(std::size_t epoch)>;

/**
 * Shuffled minibatch SGD with momentum. Gradients are zeroed, accumulated as
 * the batch mean, then applied. Throws NumericError naming the epoch and step
 * if a loss becomes non-finite.
 */
TrainReport run_sgd(ParamStore& params, std::size_t item_count, const TrainConfig& cfg, Rng& rng,
                    const ItemLossFn& item_loss, const EpochHook& on_epoch = {});

}  // namespace framesel
