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
#include "framesel/proxy.hpp"

namespace framesel {

/// Two-layer MLP D -> H (ReLU) -> 1 (sigmoid) scoring a single frame. Parameters under "sfs.*".
class SingleFrameMLP {
public:
    SingleFrameMLP() = default;
    SingleFrameMLP(std::size_t dim, std::size_t hidden, Rng& rng);
    static SingleFrameMLP from_params(ParamStore params);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t hidden() const noexcept { return hidden_; }
    const ParamStore& params() const noexcept { return params_; }
    ParamStore& params() noexcept { return params_; }

    /// delta for one frame, in (0, 1).
    double score(std::span<const double> x) const;
    /// Squared error against target; accumulates scale * gradient.
    double loss_and_grad(std::span<const double> x, double target, double scale);

private:
    ParamStore params_;
    std::size_t dim_ = 0;
    std::size_t hidden_ = 0;
};

/// Proxy softmax probability of the video's label for each frame alone.
Vector oracle_frame_targets(const ProxyClassifier& proxy, const VideoSample& video);

struct SingleTrainResult {
    SingleFrameMLP model;
    TrainReport report;
    double final_mse = 0.0;  ///< training MSE after the last epoch
};

/// Regresses the MLP output onto explicit per-frame targets with MSE loss.
SingleTrainResult train_single_on_targets(std::span<const FrameFeature* const> frames, std::span<const double> targets,
                                          const TrainConfig& cfg, std::size_t hidden, std::uint64_t seed);

/// Trains on oracle targets from the proxy.
SingleTrainResult train_single(const std::vector<VideoSample>& train_set, const ProxyClassifier& proxy,
                               const TrainConfig& cfg, std::size_t hidden, std::uint64_t seed);

/// Per-frame delta scores for a video.
Vector score_single(const SingleFrameMLP& model, const VideoSample& video);

}  // namespace framesel
