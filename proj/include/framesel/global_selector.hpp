// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "framesel/features.hpp"
#include "framesel/nncore.hpp"

namespace framesel {

/**
 * @brief Each frame concatenated with a randomly chosen later frame.
 *
 * Row i of pairs is [X_i : X_partner[i]], width 2D. Frame i < N-1 pairs
 * with a frame drawn uniformly from {i+1, ..., N-1}; the last frame pairs
 * with itself.
 */
struct PairSequence {
    Matrix pairs;
    std::vector<std::size_t> partner;

    std::size_t size() const noexcept { return partner.size(); }
};

PairSequence build_pairs(const VideoSample& video, Rng& rng);

struct GlobalConfig {
    std::size_t hidden = 64;       ///< LSTM width Ch
    double reg = 1e-4;             ///< weight of the squared norm of the relation parameters
    std::size_t pair_reps = 4;     ///< R pairings averaged at scoring time
    /// Divide the cumulative relation sum by the cumulative weight. With the raw
    /// cumulative sum the gates saturate as t grows and gamma stops ranking frames.
    bool normalize_omega = true;
};

/**
 * @brief Trainable global selector.
 *
 * Parameter names (all under "gs."):
 *   U        2D x 1     self-attention gate
 *   theta1   4D x 1     relation gate over [Z_i : Z']
 *   lstm.*   LSTM over 2D inputs with Ch hidden units
 *   V        Ch x 1     temporal attention projection
 *   b        1 x 1      temporal attention bias
 *   theta2   4D x 1     relational-temporal gate over [omega_t : Z'']
 *   head.W   Ch x C     classifier over the content vector
 *   head.b   1 x C
 */
class GlobalSelector {
public:
    GlobalSelector() = default;
    GlobalSelector(std::size_t dim, std::size_t num_classes, const GlobalConfig& cfg, Rng& rng);
    /// Shapes are read back from the parameters; cfg supplies R, reg and the omega variant.
    static GlobalSelector from_params(ParamStore params, const GlobalConfig& cfg);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t hidden() const noexcept { return cfg_.hidden; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    const GlobalConfig& config() const noexcept { return cfg_; }

    const ParamStore& params() const noexcept { return params_; }
    ParamStore& params() noexcept { return params_; }

private:
    ParamStore params_;
    std::size_t dim_ = 0;
    std::size_t num_classes_ = 0;
    GlobalConfig cfg_;
};

// ---------------------------------------------------------------------------
// Forward stages

struct SelfAttention {
    Vector alpha;   ///< sigmoid(Z_i . U)
    Vector pooled;  ///< Z' = sum alpha_i Z_i / sum alpha_i
};

SelfAttention self_attention(const Matrix& pairs, const Matrix& u);

struct RelationAttention {
    Vector beta;   ///< sigmoid([Z_i : Z'] . theta1)
    Matrix omega;  ///< row t: sum_{i<=t} beta_i Z_i (optionally divided by sum_{i<=t} beta_i)
};

RelationAttention relation_attention(const Matrix& pairs, std::span<const double> pooled, const Matrix& theta1,
                                     bool normalize = false);

struct TemporalPass {
    Matrix h;                     ///< N x Ch hidden states
    Matrix m;                     ///< N x Ch cell states
    Vector scores;                ///< e_t = V . h_t + b
    Vector lambda;                ///< softmax of scores over time
    std::vector<LstmCache> cache;  ///< per-step values for backprop
};

/// LSTM over omega from zero state; lambda normalised across time steps.
TemporalPass temporal_pass(const Matrix& omega, const LstmWeights& lstm, const Matrix& v, const Matrix& b);

struct RelationalTemporal {
    Vector pooled;  ///< Z'' = sum lambda_t omega_t / sum lambda_t
    Vector gamma;   ///< sigmoid([omega_t : Z''] . theta2)
};

RelationalTemporal relational_temporal(const Matrix& omega, std::span<const double> lambda, const Matrix& theta2);

struct Classification {
    Vector content;  ///< c_N = sum_i gamma_i h_i
    Vector logits;
    std::size_t prediction = 0;  ///< argmax of logits, ties to the lower class
};

Classification classify(std::span<const double> gamma, const Matrix& h, const Matrix& head_w, const Matrix& head_b);

/// Every intermediate of one forward pass.
struct GlobalForwardTrace {
    PairSequence pairs;
    SelfAttention attention;
    RelationAttention relation;
    TemporalPass temporal;
    RelationalTemporal relational;
    Classification output;

    const Vector& alpha() const { return attention.alpha; }
    const Vector& beta() const { return relation.beta; }
    const Vector& lambda() const { return temporal.lambda; }
    const Vector& gamma() const { return relational.gamma; }
};

GlobalForwardTrace global_forward(const GlobalSelector& model, const PairSequence& pairs);
/// Draws a pairing from rng, then runs the forward pass.
GlobalForwardTrace global_forward(const GlobalSelector& model, const VideoSample& video, Rng& rng);

/// Cross-entropy of softmax(logits) against label plus reg * (|theta1|^2 + |theta2|^2).
double loss_cls(std::span<const double> logits, std::size_t label, const Matrix& theta1, const Matrix& theta2,
                double reg);

/// loss_cls of a forward pass over pairs; accumulates scale * gradient into model.params().
double global_loss_and_grad(GlobalSelector& model, const PairSequence& pairs, std::size_t label, double scale);

struct GlobalTrainResult {
    GlobalSelector model;
    TrainReport report;
};

/// SGD with momentum on loss_cls. Pairings are redrawn every epoch from a per-epoch seed.
GlobalTrainResult train_global(const std::vector<VideoSample>& train_set, std::size_t num_classes,
                               const GlobalConfig& gcfg, const TrainConfig& cfg, std::uint64_t seed);

/// Seed of repetition rep for a video: derived from its id and seed_base.
std::uint64_t pairing_seed(const std::string& video_id, std::uint64_t seed_base, std::size_t rep);

/// Mean gamma over reps independent pairings (model.config().pair_reps when reps == 0).
Vector score_global(const GlobalSelector& model, const VideoSample& video, std::uint64_t seed_base,
                    std::size_t reps = 0);

struct GradCheckSpec {
    std::size_t num_frames = 6;
    std::size_t dim = 8;
    std::size_t hidden = 5;
    std::uint32_t num_classes = 3;
    double reg = 0.01;
    double eps = 1e-5;
    bool normalize_omega = true;
    std::uint64_t seed = 7;
};

/// Gradient check of the loss on a random instance with frozen pairs.
GradCheckReport global_gradient_check_report(const GradCheckSpec& spec);
/// Max relative error of global_gradient_check_report.
double global_gradient_check(const GradCheckSpec& spec);

}  // namespace framesel
