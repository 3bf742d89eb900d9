// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "framesel/nncore.hpp"

namespace framesel {

/**
 * @brief Per-frame feature vector: visual part followed by language part.
 *
 * values holds the full concatenated vector; the first visual_dim entries
 * are the visual features.
 */
struct FrameFeature {
    Vector values;
    std::size_t visual_dim = 0;

    static FrameFeature from_parts(std::span<const double> visual, std::span<const double> language);

    std::size_t dim() const noexcept { return values.size(); }
    std::size_t language_dim() const noexcept { return values.size() - visual_dim; }
    std::span<const double> visual() const { return std::span<const double>(values).first(visual_dim); }
    std::span<const double> language() const { return std::span<const double>(values).subspan(visual_dim); }

    friend bool operator==(const FrameFeature&, const FrameFeature&) = default;
};

/// One video: ordered frame features with a class label.
struct VideoSample {
    std::string id;
    std::vector<FrameFeature> frames;
    std::uint32_t label = 0;

    std::size_t num_frames() const noexcept { return frames.size(); }
    std::size_t dim() const { return frames.empty() ? 0 : frames.front().dim(); }
    std::size_t visual_dim() const { return frames.empty() ? 0 : frames.front().visual_dim; }

    /// Checks N >= 1, uniform (Dv, Dl), finite values and label < num_classes.
    void validate(std::size_t num_classes) const;

    friend bool operator==(const VideoSample&, const VideoSample&) = default;
};

enum class Split { Train, Test };

struct DatasetMeta {
    std::uint32_t num_classes = 0;
    std::size_t visual_dim = 0;
    std::size_t language_dim = 0;
    Split split = Split::Train;

    std::size_t dim() const noexcept { return visual_dim + language_dim; }
};

/// Word-embedding rows indexed by class id. Consumed, never trained here.
struct EmbeddingTable {
    Matrix rows;

    std::size_t vocab_size() const noexcept { return rows.rows(); }
    std::size_t dim() const noexcept { return rows.cols(); }
};

/**
 * Builds X_i = visual ++ mean of the embedding rows of the k most probable
 * classes. Ties in probability go to the lower class index. The mean is
 * unweighted.
 */
FrameFeature concat_language_embedding(std::span<const double> visual, std::span<const double> class_probs,
                                       const EmbeddingTable& table, std::size_t k);

// ---------------------------------------------------------------------------
// Video files ("SMRTVID1")

std::string encode_video(const VideoSample& video);
/// Throws FormatError (with byte offset) on structural problems, DataError
/// (naming the frame) on non-finite values.
VideoSample decode_video(std::string_view bytes);
void save_video(const VideoSample& video, const std::filesystem::path& path);
VideoSample load_video(const std::filesystem::path& path);

/// Text manifest: a "C=<int>" header line, then one relative path per line.
struct Manifest {
    std::uint32_t num_classes = 0;
    std::vector<std::string> paths;
};

std::string encode_manifest(const Manifest& manifest);
Manifest decode_manifest(std::string_view text);

struct Dataset {
    std::vector<VideoSample> videos;
    DatasetMeta meta;
};

/// Loads every video listed in the manifest (paths relative to its directory).
Dataset load_dataset(const std::filesystem::path& manifest_path, Split split);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthConfig {
    std::size_t num_frames = 40;
    std::size_t dim = 16;
    std::uint32_t num_classes = 5;
    double informative_fraction = 0.2;
    double noise_sigma = 0.5;
    std::size_t train_videos = 500;
    std::size_t test_videos = 200;
    /// Per-coordinate std of the class prototype vectors.
    double signal_scale = 1.0;
    /// Per-coordinate std of the per-video background shared by distractor frames.
    double background_scale = 1.0;

    void validate() const;
};

struct SynthDataset {
    std::vector<VideoSample> train;
    std::vector<VideoSample> test;
    DatasetMeta meta;
    /// Ground-truth informative-frame masks, parallel to train/test. Not persisted.
    std::vector<std::vector<bool>> train_informative;
    std::vector<std::vector<bool>> test_informative;
};

/**
 * Generates videos whose informative frames (class prototype + noise) form
 * one to three contiguous runs. Every other frame is a distractor: a
 * background vector shared within the video plus noise, independent of the
 * class. Fully determined by (cfg, seed).
 */
SynthDataset synth_dataset(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace framesel
