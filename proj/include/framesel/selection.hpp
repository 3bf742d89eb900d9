// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "framesel/nncore.hpp"

namespace framesel {

/// Per-frame scores of both streams and their product.
struct FrameScores {
    Vector delta;
    Vector gamma;
    Vector combined;  ///< delta[i] * gamma[i]
};

FrameScores combine_scores(std::span<const double> delta, std::span<const double> gamma);

enum class Strategy { Smart, Random, Uniform, All };

std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view text);

struct SelectionResult {
    std::vector<std::size_t> indices;  ///< ascending, distinct
    Strategy strategy = Strategy::Smart;
    std::size_t budget = 0;

    friend bool operator==(const SelectionResult&, const SelectionResult&) = default;
};

/// The n frames with the largest combined score (ties to the lower index), sorted by index.
SelectionResult select_top_n(const FrameScores& scores, std::size_t n);
/// Same ranking applied to a raw score vector.
SelectionResult select_top_n(std::span<const double> scores, std::size_t n);

/// Evenly spaced frames floor(j N / n), j = 0..n-1.
SelectionResult baseline_uniform(std::size_t num_frames, std::size_t n);
/// min(n, N) distinct frames drawn without replacement.
SelectionResult baseline_random(std::size_t num_frames, std::size_t n, std::uint64_t seed);
SelectionResult select_all(std::size_t num_frames);

/// "<video_id>\t<strategy>\t<n>\tidx,idx,..."
std::string format_selection_line(std::string_view video_id, const SelectionResult& result);

}  // namespace framesel
