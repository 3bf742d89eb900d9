// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "framesel/errors.hpp"

namespace framesel {

std::size_t predict_video(const ProxyClassifier& proxy, const VideoSample& video, const SelectionResult& selected) {
    if (selected.indices.empty()) throw DomainError("predict_video: empty selection");
    Vector mean(proxy.num_classes(), 0.0);
    for (std::size_t i : selected.indices) {
        if (i >= video.num_frames()) throw DomainError("predict_video: frame index out of range");
        const Vector p = proxy.frame_probabilities(video.frames[i].values);
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
    }
    for (auto& v : mean) v /= static_cast<double>(selected.indices.size());
    return argmax(mean);
}

// ---------------------------------------------------------------------------
// FLOPs

std::size_t dense_flops(std::size_t in, std::size_t out) { return 2 * in * out; }

std::size_t lstm_step_flops(std::size_t in, std::size_t hidden) {
    return 8 * in * hidden + 8 * hidden * hidden + 8 * hidden;
}

FlopsLedger flops_count(const ModelShapes& s, Strategy strategy) {
    FlopsLedger l;
    if (strategy == Strategy::Smart) {
        const std::size_t single = dense_flops(s.dim, s.mlp_hidden) + dense_flops(s.mlp_hidden, 1);
        const std::size_t global_frame = 32 * s.dim + lstm_step_flops(2 * s.dim, s.lstm_hidden) + 4 * s.lstm_hidden;
        const std::size_t global_video =
            s.pair_reps * (s.num_frames * global_frame + dense_flops(s.lstm_hidden, s.num_classes));
        l.selector_flops = s.num_frames * (s.extractor_flops_per_frame + single) + global_video + s.num_frames;
    }
    const std::size_t head = s.proxy_hidden == 0 ? dense_flops(s.dim, s.num_classes)
                                                 : dense_flops(s.dim, s.proxy_hidden) +
                                                       dense_flops(s.proxy_hidden, s.num_classes);
    l.classifier_flops_per_frame = s.backbone_flops_per_frame + head;
    l.budget = strategy == Strategy::All ? s.num_frames : std::min(s.budget, s.num_frames);
    l.total = l.selector_flops + l.budget * l.classifier_flops_per_frame;
    l.full_video_total = s.num_frames * l.classifier_flops_per_frame;
    l.ratio = l.total ? static_cast<double>(l.full_video_total) / static_cast<double>(l.total) : 0.0;
    return l;
}

// ---------------------------------------------------------------------------
// Evaluation

std::uint64_t random_selection_seed(std::uint64_t base, std::size_t run, const std::string& video_id) {
    return mix_seed(mix_seed(base, run), hash_string(video_id));
}

EvalContext::EvalContext(const std::vector<VideoSample>& test_set, const Models& models, const EvalSeeds& seeds)
    : videos_(&test_set), models_(models), seeds_(seeds) {
    if (test_set.empty()) throw DomainError("evaluate: empty test set");
    const std::size_t d = models.proxy.dim();
    if (models.single.dim() != d || models.global.dim() != d) {
        throw ConfigError("evaluate: model feature dimensions disagree");
    }
    if (models.global.num_classes() != models.proxy.num_classes()) {
        throw ConfigError("evaluate: model class counts disagree");
    }
    scores_.reserve(test_set.size());
    probs_.reserve(test_set.size());
    for (const auto& v : test_set) {
        if (v.dim() != d) throw ConfigError("evaluate: video '" + v.id + "' has D=" + std::to_string(v.dim()) +
                                            ", models expect " + std::to_string(d));
        scores_.push_back(combine_scores(score_single(models.single, v), score_global(models.global, v, seeds.pairing)));
        Matrix p(v.num_frames(), models.proxy.num_classes());
        for (std::size_t i = 0; i < v.num_frames(); ++i) {
            const Vector row = models.proxy.frame_probabilities(v.frames[i].values);
            std::copy(row.begin(), row.end(), p.row(i).begin());
        }
        probs_.push_back(std::move(p));
    }
}

SelectionResult EvalContext::select(std::size_t video, Strategy strategy, std::size_t n, std::size_t run) const {
    const auto& v = (*videos_)[video];
    switch (strategy) {
        case Strategy::Smart: return select_top_n(scores_[video], n);
        case Strategy::Uniform: return baseline_uniform(v.num_frames(), n);
        case Strategy::Random: return baseline_random(v.num_frames(), n, random_selection_seed(seeds_.random, run, v.id));
        case Strategy::All: return select_all(v.num_frames());
    }
    throw DomainError("unknown strategy");
}

std::size_t EvalContext::predict(std::size_t video, const SelectionResult& selected) const {
    if (selected.indices.empty()) throw DomainError("predict_video: empty selection");
    const Matrix& p = probs_[video];
    Vector mean(p.cols(), 0.0);
    for (std::size_t i : selected.indices) {
        auto row = p.row(i);
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
    }
    for (auto& v : mean) v /= static_cast<double>(selected.indices.size());
    return argmax(mean);
}

ModelShapes EvalContext::shapes(std::size_t num_frames, std::size_t n) const {
    ModelShapes s;
    s.dim = models_.proxy.dim();
    s.lstm_hidden = models_.global.hidden();
    s.num_classes = models_.proxy.num_classes();
    s.mlp_hidden = models_.single.hidden();
    s.proxy_hidden = models_.proxy.hidden();
    s.pair_reps = models_.global.config().pair_reps;
    s.num_frames = num_frames;
    s.budget = n;
    s.extractor_flops_per_frame = 2 * 1024 * s.dim;
    return s;
}

EvalRow evaluate(const EvalContext& ctx, Strategy strategy, std::size_t n) {
    const auto& videos = ctx.videos();
    const std::size_t runs = strategy == Strategy::Random ? std::max<std::size_t>(ctx.seeds().random_runs, 1) : 1;
    std::vector<double> accs;
    for (std::size_t run = 0; run < runs; ++run) {
        std::size_t correct = 0;
        for (std::size_t v = 0; v < videos.size(); ++v) {
            correct += ctx.predict(v, ctx.select(v, strategy, n, run)) == videos[v].label ? 1 : 0;
        }
        accs.push_back(static_cast<double>(correct) / static_cast<double>(videos.size()));
    }
    EvalRow row;
    row.strategy = strategy;
    row.budget = strategy == Strategy::All ? 0 : n;
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    row.accuracy = mean;
    row.sd = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;

    std::size_t max_frames = 0;
    for (const auto& v : videos) max_frames = std::max(max_frames, v.num_frames());
    if (strategy == Strategy::All) n = max_frames;
    row.ledger = flops_count(ctx.shapes(max_frames, n), strategy);
    return row;
}

EvalRow evaluate(const std::vector<VideoSample>& test_set, Strategy strategy, std::size_t n, const Models& models,
                 const EvalSeeds& seeds) {
    return evaluate(EvalContext(test_set, models, seeds), strategy, n);
}

std::vector<EvalRow> evaluate_sweep(const EvalContext& ctx, const std::vector<std::size_t>& budgets) {
    std::vector<EvalRow> rows;
    for (std::size_t n : budgets) {
        for (Strategy s : {Strategy::Smart, Strategy::Uniform, Strategy::Random}) rows.push_back(evaluate(ctx, s, n));
    }
    rows.push_back(evaluate(ctx, Strategy::All, 1));
    return rows;
}

std::string format_report_tsv(const std::vector<EvalRow>& rows) {
    std::string out = "strategy\tn\taccuracy\tsd\tselector_flops\ttotal_flops\tratio\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s\t%zu\t%.6f\t%.6f\t%zu\t%zu\t%.6f\n", std::string(to_string(r.strategy)).c_str(),
                      r.strategy == Strategy::All ? r.ledger.budget : r.budget, r.accuracy, r.sd,
                      r.ledger.selector_flops, r.ledger.total, r.ledger.ratio);
        out += buf;
    }
    return out;
}

std::string format_report_table(const std::vector<EvalRow>& rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-8s %5s %9s %8s %15s %15s %8s\n", "strategy", "n", "accuracy", "sd",
                  "selector_flops", "total_flops", "ratio");
    out += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-8s %5zu %8.2f%% %7.2f%% %15zu %15zu %8.3f\n",
                      std::string(to_string(r.strategy)).c_str(),
                      r.strategy == Strategy::All ? r.ledger.budget : r.budget, 100.0 * r.accuracy, 100.0 * r.sd,
                      r.ledger.selector_flops, r.ledger.total, r.ledger.ratio);
        out += buf;
    }
    return out;
}

}  // namespace framesel
