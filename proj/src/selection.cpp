// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/selection.hpp"

#include <algorithm>
#include <numeric>

#include "framesel/errors.hpp"

namespace framesel {

FrameScores combine_scores(std::span<const double> delta, std::span<const double> gamma) {
    if (delta.size() != gamma.size()) {
        throw DimensionError("combine_scores: delta has " + std::to_string(delta.size()) + " entries, gamma " +
                             std::to_string(gamma.size()));
    }
    FrameScores s;
    s.delta.assign(delta.begin(), delta.end());
    s.gamma.assign(gamma.begin(), gamma.end());
    s.combined.resize(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) s.combined[i] = delta[i] * gamma[i];
    return s;
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Smart: return "smart";
        case Strategy::Random: return "random";
        case Strategy::Uniform: return "uniform";
        case Strategy::All: return "all";
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
    for (Strategy s : {Strategy::Smart, Strategy::Random, Strategy::Uniform, Strategy::All}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

SelectionResult select_top_n(std::span<const double> scores, std::size_t n) {
    if (n == 0) throw DomainError("select_top_n: budget must be at least 1");
    const std::size_t keep = std::min(n, scores.size());
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return {std::move(order), Strategy::Smart, n};
}

SelectionResult select_top_n(const FrameScores& scores, std::size_t n) { return select_top_n(scores.combined, n); }

SelectionResult baseline_uniform(std::size_t num_frames, std::size_t n) {
    if (n == 0) throw DomainError("baseline_uniform: budget must be at least 1");
    const std::size_t keep = std::min(n, num_frames);
    std::vector<bool> taken(num_frames, false);
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = j * num_frames / n;
        if (i < num_frames && !taken[i]) {
            taken[i] = true;
            idx.push_back(i);
        }
    }
    // Pad with the first unused frames after the last pick, wrapping to the start.
    for (std::size_t step = 0, cur = idx.empty() ? 0 : idx.back(); idx.size() < keep && step < num_frames; ++step) {
        cur = (cur + 1) % num_frames;
        if (!taken[cur]) {
            taken[cur] = true;
            idx.push_back(cur);
        }
    }
    std::sort(idx.begin(), idx.end());
    return {std::move(idx), Strategy::Uniform, n};
}

SelectionResult baseline_random(std::size_t num_frames, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DomainError("baseline_random: budget must be at least 1");
    const std::size_t keep = std::min(n, num_frames);
    std::vector<std::size_t> pool(num_frames);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng rng(seed);
    // Partial Fisher-Yates: the first `keep` slots become the sample.
    for (std::size_t i = 0; i < keep; ++i) std::swap(pool[i], pool[i + rng.uniform_index(num_frames - i)]);
    pool.resize(keep);
    std::sort(pool.begin(), pool.end());
    return {std::move(pool), Strategy::Random, n};
}

SelectionResult select_all(std::size_t num_frames) {
    std::vector<std::size_t> idx(num_frames);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return {std::move(idx), Strategy::All, num_frames};
}

std::string format_selection_line(std::string_view video_id, const SelectionResult& result) {
    std::string line(video_id);
    line += '\t';
    line += to_string(result.strategy);
    line += '\t';
    line += std::to_string(result.budget);
    line += '\t';
    for (std::size_t k = 0; k < result.indices.size(); ++k) {
        if (k) line += ',';
        line += std::to_string(result.indices[k]);
    }
    return line;
}

}  // namespace framesel
