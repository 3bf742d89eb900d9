// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "framesel/features.hpp"
#include "framesel/global_selector.hpp"
#include "framesel/proxy.hpp"
#include "framesel/selection.hpp"
#include "framesel/single_selector.hpp"

namespace framesel {

/// Mean of the per-frame softmax vectors over the selected frames, then argmax.
std::size_t predict_video(const ProxyClassifier& proxy, const VideoSample& video, const SelectionResult& selected);

// ---------------------------------------------------------------------------
// FLOPs accounting
//
// Counts are analytic. A multiply-accumulate counts as two FLOPs.
//   dense(in, out)      = 2 in out
//   lstm_step(in, h)    = 8 in h + 8 h^2 + 8 h
//   single selector     = dense(D, H) + dense(H, 1)
//   global, per frame   = 32 D + lstm_step(2D, Ch) + 4 Ch     (one pairing)
//   global, per video   = R (N per-frame + dense(Ch, C))
//   selector_flops      = N (extractor + single) + global per video + N   (score products)
//   classifier / frame  = backbone + proxy head
//   total               = selector_flops + budget classifier / frame
//   full_video_total    = N classifier / frame

struct ModelShapes {
    std::size_t dim = 16;           ///< D
    std::size_t lstm_hidden = 64;   ///< Ch
    std::size_t num_classes = 5;    ///< C
    std::size_t mlp_hidden = 64;    ///< H of the single-frame selector
    std::size_t proxy_hidden = 0;   ///< hidden width of the proxy head (0 = linear)
    std::size_t pair_reps = 4;      ///< R
    std::size_t num_frames = 40;    ///< N
    std::size_t budget = 8;         ///< n
    /// Lightweight per-frame feature extractor feeding the selectors: dense(1024, D) by default.
    std::size_t extractor_flops_per_frame = 2 * 1024 * 16;
    /// Expensive per-frame representation used by the downstream classifier: dense(1024, 4096) by default.
    std::size_t backbone_flops_per_frame = 2 * 1024 * 4096;
};

struct FlopsLedger {
    std::size_t selector_flops = 0;
    std::size_t classifier_flops_per_frame = 0;
    std::size_t budget = 0;  ///< frames actually classified, min(n, N)
    std::size_t total = 0;
    std::size_t full_video_total = 0;
    double ratio = 0.0;
};

std::size_t dense_flops(std::size_t in, std::size_t out);
std::size_t lstm_step_flops(std::size_t in, std::size_t hidden);

/// Ledger for one video. Random, uniform and all-frames strategies run no selector.
FlopsLedger flops_count(const ModelShapes& shapes, Strategy strategy = Strategy::Smart);

// ---------------------------------------------------------------------------
// Evaluation

struct Models {
    const ProxyClassifier& proxy;
    const SingleFrameMLP& single;
    const GlobalSelector& global;
};

struct EvalSeeds {
    std::uint64_t pairing = 42;  ///< seed_base of score_global
    std::uint64_t random = 42;   ///< base seed of the random baseline
    std::size_t random_runs = 10;
};

/// Per-video scores and frame probabilities computed once and reused across budgets.
class EvalContext {
public:
    EvalContext(const std::vector<VideoSample>& test_set, const Models& models, const EvalSeeds& seeds);

    const std::vector<VideoSample>& videos() const noexcept { return *videos_; }
    const FrameScores& scores(std::size_t video) const { return scores_[video]; }
    const Models& models() const noexcept { return models_; }
    const EvalSeeds& seeds() const noexcept { return seeds_; }

    SelectionResult select(std::size_t video, Strategy strategy, std::size_t n, std::size_t run = 0) const;
    std::size_t predict(std::size_t video, const SelectionResult& selected) const;
    ModelShapes shapes(std::size_t num_frames, std::size_t n) const;

private:
    const std::vector<VideoSample>* videos_;
    Models models_;
    EvalSeeds seeds_;
    std::vector<FrameScores> scores_;
    std::vector<Matrix> probs_;  ///< per video: N x C frame probabilities
};

struct EvalRow {
    Strategy strategy = Strategy::Smart;
    std::size_t budget = 0;
    double accuracy = 0.0;
    double sd = 0.0;  ///< over random runs; 0 for deterministic strategies
    FlopsLedger ledger;  ///< for a video of the test set's maximum length
};

/// Seed of the random baseline for one video and run.
std::uint64_t random_selection_seed(std::uint64_t base, std::size_t run, const std::string& video_id);

EvalRow evaluate(const EvalContext& ctx, Strategy strategy, std::size_t n);
EvalRow evaluate(const std::vector<VideoSample>& test_set, Strategy strategy, std::size_t n, const Models& models,
                 const EvalSeeds& seeds);

/// Rows for every budget and strategy (smart, uniform, random) plus one all-frames row.
std::vector<EvalRow> evaluate_sweep(const EvalContext& ctx, const std::vector<std::size_t>& budgets);

/// Tab-separated: strategy, n, accuracy, sd, selector_flops, total_flops, ratio.
std::string format_report_tsv(const std::vector<EvalRow>& rows);
/// Fixed-width table for terminals.
std::string format_report_table(const std::vector<EvalRow>& rows);

}  // namespace framesel
