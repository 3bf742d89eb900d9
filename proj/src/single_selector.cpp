// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/single_selector.hpp"

#include <algorithm>

#include "framesel/errors.hpp"

namespace framesel {

SingleFrameMLP::SingleFrameMLP(std::size_t dim, std::size_t hidden, Rng& rng) : dim_(dim), hidden_(hidden) {
    if (dim == 0 || hidden == 0) throw ConfigError("single-frame MLP needs D > 0 and H > 0");
    params_.add("sfs.W1", uniform_init(dim, hidden, dim, rng));
    params_.add("sfs.b1", Matrix(1, hidden));
    params_.add("sfs.W2", uniform_init(hidden, 1, hidden, rng));
    params_.add("sfs.b2", Matrix(1, 1));
}

SingleFrameMLP SingleFrameMLP::from_params(ParamStore params) {
    for (const char* name : {"sfs.W1", "sfs.b1", "sfs.W2", "sfs.b2"}) {
        if (!params.contains(name)) throw ConfigError(std::string("single-frame model is missing ") + name);
    }
    SingleFrameMLP m;
    m.dim_ = params.value("sfs.W1").rows();
    m.hidden_ = params.value("sfs.W1").cols();
    if (params.value("sfs.W2").rows() != m.hidden_ || params.value("sfs.W2").cols() != 1) {
        throw ConfigError("single-frame model has inconsistent layer shapes");
    }
    m.params_ = std::move(params);
    return m;
}

double SingleFrameMLP::score(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw DimensionError("single-frame MLP expects D=" + std::to_string(dim_) + ", got " + std::to_string(x.size()));
    }
    Vector h = dense_forward(x, params_.value("sfs.W1"), params_.value("sfs.b1"));
    for (auto& v : h) v = std::max(0.0, v);
    return sigmoid(dense_forward(h, params_.value("sfs.W2"), params_.value("sfs.b2"))[0]);
}

double SingleFrameMLP::loss_and_grad(std::span<const double> x, double target, double scale) {
    Vector h = dense_forward(x, params_.value("sfs.W1"), params_.value("sfs.b1"));
    for (auto& v : h) v = std::max(0.0, v);
    const double out = sigmoid(dense_forward(h, params_.value("sfs.W2"), params_.value("sfs.b2"))[0]);
    const double err = out - target;
    const double dz[1] = {scale * 2.0 * err * out * (1.0 - out)};
    Vector dh = dense_backward(h, params_.value("sfs.W2"), dz, params_.grad("sfs.W2"), params_.grad("sfs.b2"));
    for (std::size_t j = 0; j < dh.size(); ++j) {
        if (h[j] <= 0.0) dh[j] = 0.0;
    }
    dense_backward(x, params_.value("sfs.W1"), dh, params_.grad("sfs.W1"), params_.grad("sfs.b1"));
    return err * err;
}

Vector oracle_frame_targets(const ProxyClassifier& proxy, const VideoSample& video) {
    if (!proxy.trained()) throw StateError("oracle targets need a trained proxy classifier");
    if (video.label >= proxy.num_classes()) throw ConfigError("video label outside the proxy's class range");
    Vector targets(video.num_frames());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        targets[i] = proxy.frame_probabilities(video.frames[i].values)[video.label];
    }
    return targets;
}

SingleTrainResult train_single_on_targets(std::span<const FrameFeature* const> frames, std::span<const double> targets,
                                          const TrainConfig& cfg, std::size_t hidden, std::uint64_t seed) {
    if (frames.empty()) throw DomainError("train_single: no frames");
    if (frames.size() != targets.size()) throw DimensionError("train_single: frame and target counts differ");
    Rng rng(seed);
    SingleTrainResult result{SingleFrameMLP(frames.front()->dim(), hidden, rng), {}, 0.0};
    auto& model = result.model;
    result.report = run_sgd(model.params(), frames.size(), cfg, rng, [&](std::size_t i, double scale) {
        return model.loss_and_grad(frames[i]->values, targets[i], scale);
    });
    double sse = 0.0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const double e = model.score(frames[i]->values) - targets[i];
        sse += e * e;
    }
    result.final_mse = sse / static_cast<double>(frames.size());
    return result;
}

SingleTrainResult train_single(const std::vector<VideoSample>& train_set, const ProxyClassifier& proxy,
                               const TrainConfig& cfg, std::size_t hidden, std::uint64_t seed) {
    std::vector<const FrameFeature*> frames;
    Vector targets;
    for (const auto& v : train_set) {
        const Vector t = oracle_frame_targets(proxy, v);
        for (std::size_t i = 0; i < v.num_frames(); ++i) {
            frames.push_back(&v.frames[i]);
            targets.push_back(t[i]);
        }
    }
    return train_single_on_targets(frames, targets, cfg, hidden, seed);
}

Vector score_single(const SingleFrameMLP& model, const VideoSample& video) {
    Vector delta(video.num_frames());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = model.score(video.frames[i].values);
    return delta;
}

}  // namespace framesel
