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
 * @brief Per-frame classifier standing in for the expensive backbone.
 *
 * Dense D -> C with softmax, or D -> hidden (ReLU) -> C when hidden > 0.
 * Parameters are stored under "proxy.*". It provides both the oracle
 * per-frame confidences and the downstream video prediction.
 */
class ProxyClassifier {
public:
    ProxyClassifier() = default;
    ProxyClassifier(std::size_t dim, std::size_t num_classes, std::size_t hidden, Rng& rng);
    /// Wraps loaded parameters; shapes are read back from the store.
    static ProxyClassifier from_params(ParamStore params);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t hidden() const noexcept { return hidden_; }
    bool trained() const noexcept { return trained_; }
    void mark_trained() noexcept { trained_ = true; }

    const ParamStore& params() const noexcept { return params_; }
    ParamStore& params() noexcept { return params_; }

    Vector logits(std::span<const double> x) const;
    Vector frame_probabilities(std::span<const double> x) const;
    /// Cross-entropy of one frame; accumulates scale * gradient.
    double loss_and_grad(std::span<const double> x, std::size_t label, double scale);

private:
    ParamStore params_;
    std::size_t dim_ = 0;
    std::size_t num_classes_ = 0;
    std::size_t hidden_ = 0;
    bool trained_ = false;
};

struct ProxyTrainResult {
    ProxyClassifier model;
    TrainReport report;
};

/// Cross-entropy training on individual frames labelled with their video's class.
ProxyTrainResult train_proxy(const std::vector<VideoSample>& train_set, std::size_t num_classes,
                             const TrainConfig& cfg, std::size_t hidden, std::uint64_t seed);

/// Fraction of frames whose argmax matches the video label.
double frame_accuracy(const ProxyClassifier& proxy, const std::vector<VideoSample>& videos);

/// Index of the largest value; ties go to the lower index.
std::size_t argmax(std::span<const double> values);

}  // namespace framesel
