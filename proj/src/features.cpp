// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "framesel/errors.hpp"

namespace framesel {

namespace {

constexpr std::string_view kVideoMagic = "SMRTVID1";

}  // namespace

FrameFeature FrameFeature::from_parts(std::span<const double> visual, std::span<const double> language) {
    FrameFeature f;
    f.visual_dim = visual.size();
    f.values.reserve(visual.size() + language.size());
    f.values.insert(f.values.end(), visual.begin(), visual.end());
    f.values.insert(f.values.end(), language.begin(), language.end());
    return f;
}

void VideoSample::validate(std::size_t num_classes) const {
    if (frames.empty()) throw DataError("video '" + id + "' has no frames");
    const std::size_t dv = frames.front().visual_dim;
    const std::size_t d = frames.front().dim();
    if (dv == 0) throw DataError("video '" + id + "' has empty visual features");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].visual_dim != dv || frames[i].dim() != d) {
            throw DataError("video '" + id + "' frame " + std::to_string(i) + " has inconsistent dimensions");
        }
        for (double v : frames[i].values) {
            if (!std::isfinite(v)) throw DataError("video '" + id + "' frame " + std::to_string(i) + " is not finite");
        }
    }
    if (label >= num_classes) {
        throw DataError("video '" + id + "' label " + std::to_string(label) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
}

FrameFeature concat_language_embedding(std::span<const double> visual, std::span<const double> class_probs,
                                       const EmbeddingTable& table, std::size_t k) {
    if (k == 0) throw DomainError("concat_language_embedding: k must be at least 1");
    if (class_probs.size() != table.vocab_size()) {
        throw DimensionError("concat_language_embedding: " + std::to_string(class_probs.size()) +
                             " class probabilities vs vocabulary of " + std::to_string(table.vocab_size()));
    }
    if (k > table.vocab_size()) {
        throw DomainError("concat_language_embedding: k=" + std::to_string(k) + " exceeds vocabulary size " +
                          std::to_string(table.vocab_size()));
    }
    const double total = std::accumulate(class_probs.begin(), class_probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-6) throw DomainError("concat_language_embedding: probabilities do not sum to 1");

    std::vector<std::size_t> order(class_probs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return class_probs[a] > class_probs[b]; });

    Vector language(table.dim(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        auto row = table.rows.row(order[j]);
        for (std::size_t c = 0; c < language.size(); ++c) language[c] += row[c];
    }
    for (auto& v : language) v /= static_cast<double>(k);
    return FrameFeature::from_parts(visual, language);
}

// ---------------------------------------------------------------------------
// Video files

std::string encode_video(const VideoSample& video) {
    detail::ByteWriter w;
    w.bytes(kVideoMagic);
    w.str(video.id);
    w.u32(video.label);
    w.u32(static_cast<std::uint32_t>(video.num_frames()));
    const std::size_t dv = video.visual_dim();
    const std::size_t dl = video.frames.empty() ? 0 : video.frames.front().language_dim();
    w.u32(static_cast<std::uint32_t>(dv));
    w.u32(static_cast<std::uint32_t>(dl));
    for (const auto& f : video.frames) {
        for (double v : f.values) w.f64(v);
    }
    return w.take();
}

VideoSample decode_video(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < kVideoMagic.size() || r.bytes(kVideoMagic.size()) != kVideoMagic) {
        throw FormatError("bad video file magic", 0);
    }
    VideoSample video;
    video.id = r.str();
    video.label = r.u32();
    const std::size_t n_at = r.offset();
    const std::uint32_t n = r.u32();
    const std::uint32_t dv = r.u32();
    const std::uint32_t dl = r.u32();
    if (n == 0) throw FormatError("video has zero frames", n_at);
    if (dv == 0) throw FormatError("video has zero visual dimension", n_at + 4);
    const std::size_t d = static_cast<std::size_t>(dv) + dl;
    if (static_cast<std::size_t>(n) * d > r.remaining() / 8) {
        throw FormatError("frame payload truncated: expected " + std::to_string(static_cast<std::size_t>(n) * d * 8) +
                              " bytes, have " + std::to_string(r.remaining()),
                          r.offset());
    }
    video.frames.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto& f = video.frames[i];
        f.visual_dim = dv;
        f.values.resize(d);
        for (auto& v : f.values) {
            v = r.f64();
            if (!std::isfinite(v)) {
                throw DataError("video '" + video.id + "' frame " + std::to_string(i) + " has a non-finite value");
            }
        }
    }
    r.expect_end();
    return video;
}

void save_video(const VideoSample& video, const std::filesystem::path& path) {
    detail::write_file_atomic(path, encode_video(video));
}

VideoSample load_video(const std::filesystem::path& path) { return decode_video(detail::read_file(path)); }

std::string encode_manifest(const Manifest& manifest) {
    std::string out = "C=" + std::to_string(manifest.num_classes) + "\n";
    for (const auto& p : manifest.paths) out += p + "\n";
    return out;
}

Manifest decode_manifest(std::string_view text) {
    Manifest m;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (header) {
            if (line.substr(0, 2) != "C=") throw FormatError("manifest must start with 'C=<int>'", pos);
            auto digits = line.substr(2);
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), m.num_classes);
            if (ec != std::errc() || ptr != digits.data() + digits.size() || m.num_classes < 2) {
                throw FormatError("manifest class count must be an integer >= 2", pos + 2);
            }
            header = false;
        } else if (!line.empty()) {
            m.paths.emplace_back(line);
        }
        pos = end + 1;
    }
    if (header) throw FormatError("empty manifest", 0);
    return m;
}

Dataset load_dataset(const std::filesystem::path& manifest_path, Split split) {
    const Manifest manifest = decode_manifest(detail::read_file(manifest_path));
    Dataset ds;
    ds.meta.num_classes = manifest.num_classes;
    ds.meta.split = split;
    const auto base = manifest_path.parent_path();
    for (const auto& rel : manifest.paths) {
        VideoSample v = load_video(base / rel);
        v.validate(manifest.num_classes);
        if (ds.videos.empty()) {
            ds.meta.visual_dim = v.visual_dim();
            ds.meta.language_dim = v.frames.front().language_dim();
        } else if (v.visual_dim() != ds.meta.visual_dim || v.dim() != ds.meta.dim()) {
            throw DataError("video '" + v.id + "' dimensions differ from the rest of " + manifest_path.string());
        }
        ds.videos.push_back(std::move(v));
    }
    if (ds.videos.empty()) throw DataError("manifest " + manifest_path.string() + " lists no videos");
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SynthConfig::validate() const {
    if (num_frames == 0 || dim == 0 || train_videos == 0 || test_videos == 0) {
        throw ConfigError("synthetic config sizes must be positive");
    }
    if (num_classes < 2) throw ConfigError("synthetic config needs at least 2 classes");
    if (!(informative_fraction > 0.0 && informative_fraction <= 1.0)) {
        throw ConfigError("informative fraction must lie in (0, 1]");
    }
    if (noise_sigma < 0.0 || signal_scale <= 0.0 || background_scale < 0.0) {
        throw ConfigError("synthetic config scales must be non-negative (signal positive)");
    }
}

namespace {

/// Marks 1-3 contiguous runs covering informative_fraction of the frames.
std::vector<bool> plant_runs(std::size_t n, double fraction, Rng& rng) {
    const auto wanted = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    const std::size_t k = std::clamp<std::size_t>(wanted, 1, n);
    const std::size_t free_frames = n - k;
    const std::size_t max_runs = std::min({std::size_t{3}, k, free_frames + 1});
    const std::size_t runs = 1 + rng.uniform_index(max_runs);

    // Run lengths: a random composition of k into `runs` positive parts.
    std::vector<std::size_t> cuts;
    std::vector<std::size_t> candidates(k - 1);
    std::iota(candidates.begin(), candidates.end(), std::size_t{1});
    rng.shuffle(candidates);
    cuts.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(runs - 1));
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::size_t> lengths;
    std::size_t prev = 0;
    for (std::size_t c : cuts) {
        lengths.push_back(c - prev);
        prev = c;
    }
    lengths.push_back(k - prev);

    // Gaps: runs + 1 slots, inner gaps at least one frame so runs stay separate.
    std::vector<std::size_t> gaps(runs + 1, 0);
    for (std::size_t g = 1; g < runs; ++g) gaps[g] = 1;
    for (std::size_t extra = free_frames - (runs - 1); extra > 0; --extra) ++gaps[rng.uniform_index(runs + 1)];

    std::vector<bool> mask(n, false);
    std::size_t pos = gaps[0];
    for (std::size_t r = 0; r < runs; ++r) {
        for (std::size_t j = 0; j < lengths[r]; ++j) mask[pos + j] = true;
        pos += lengths[r] + gaps[r + 1];
    }
    return mask;
}

VideoSample make_video(const SynthConfig& cfg, const Matrix& prototypes, const std::string& id, Rng& rng,
                       std::vector<bool>& mask) {
    VideoSample v;
    v.id = id;
    v.label = static_cast<std::uint32_t>(rng.uniform_index(cfg.num_classes));
    mask = plant_runs(cfg.num_frames, cfg.informative_fraction, rng);

    Vector background(cfg.dim);
    for (auto& b : background) b = cfg.background_scale * rng.normal();

    auto proto = prototypes.row(v.label);
    v.frames.resize(cfg.num_frames);
    for (std::size_t i = 0; i < cfg.num_frames; ++i) {
        Vector x(cfg.dim);
        for (std::size_t c = 0; c < cfg.dim; ++c) {
            const double base = mask[i] ? proto[c] : background[c];
            x[c] = base + cfg.noise_sigma * rng.normal();
        }
        v.frames[i] = FrameFeature::from_parts(x, {});
    }
    return v;
}

std::string video_id(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%05zu", prefix, i);
    return buf;
}

}  // namespace

SynthDataset synth_dataset(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    Matrix prototypes(cfg.num_classes, cfg.dim);
    for (auto& p : prototypes.data()) p = cfg.signal_scale * rng.normal();

    SynthDataset ds;
    ds.meta.num_classes = cfg.num_classes;
    ds.meta.visual_dim = cfg.dim;
    ds.meta.language_dim = 0;
    ds.meta.split = Split::Train;

    Rng train_rng(mix_seed(seed, 1));
    Rng test_rng(mix_seed(seed, 2));
    ds.train.resize(cfg.train_videos);
    ds.train_informative.resize(cfg.train_videos);
    for (std::size_t i = 0; i < cfg.train_videos; ++i) {
        ds.train[i] = make_video(cfg, prototypes, video_id("train", i), train_rng, ds.train_informative[i]);
    }
    ds.test.resize(cfg.test_videos);
    ds.test_informative.resize(cfg.test_videos);
    for (std::size_t i = 0; i < cfg.test_videos; ++i) {
        ds.test[i] = make_video(cfg, prototypes, video_id("test", i), test_rng, ds.test_informative[i]);
    }
    return ds;
}

}  // namespace framesel
