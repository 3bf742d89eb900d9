// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/proxy.hpp"

#include <algorithm>
#include <cmath>

#include "framesel/errors.hpp"

namespace framesel {

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw DomainError("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

ProxyClassifier::ProxyClassifier(std::size_t dim, std::size_t num_classes, std::size_t hidden, Rng& rng)
    : dim_(dim), num_classes_(num_classes), hidden_(hidden) {
    if (dim == 0 || num_classes < 2) throw ConfigError("proxy classifier needs D > 0 and C >= 2");
    if (hidden == 0) {
        params_.add("proxy.W", uniform_init(dim, num_classes, dim, rng));
        params_.add("proxy.b", Matrix(1, num_classes));
    } else {
        params_.add("proxy.W1", uniform_init(dim, hidden, dim, rng));
        params_.add("proxy.b1", Matrix(1, hidden));
        params_.add("proxy.W", uniform_init(hidden, num_classes, hidden, rng));
        params_.add("proxy.b", Matrix(1, num_classes));
    }
}

ProxyClassifier ProxyClassifier::from_params(ParamStore params) {
    ProxyClassifier p;
    if (!params.contains("proxy.W") || !params.contains("proxy.b")) {
        throw ConfigError("parameter file does not hold a proxy classifier");
    }
    const Matrix& w = params.value("proxy.W");
    p.num_classes_ = w.cols();
    if (params.contains("proxy.W1")) {
        p.dim_ = params.value("proxy.W1").rows();
        p.hidden_ = params.value("proxy.W1").cols();
    } else {
        p.dim_ = w.rows();
    }
    p.params_ = std::move(params);
    p.trained_ = true;
    return p;
}

Vector ProxyClassifier::logits(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw DimensionError("proxy classifier expects D=" + std::to_string(dim_) + ", got " + std::to_string(x.size()));
    }
    if (hidden_ == 0) return dense_forward(x, params_.value("proxy.W"), params_.value("proxy.b"));
    Vector h = dense_forward(x, params_.value("proxy.W1"), params_.value("proxy.b1"));
    for (auto& v : h) v = std::max(0.0, v);
    return dense_forward(h, params_.value("proxy.W"), params_.value("proxy.b"));
}

Vector ProxyClassifier::frame_probabilities(std::span<const double> x) const { return softmax(logits(x)); }

double ProxyClassifier::loss_and_grad(std::span<const double> x, std::size_t label, double scale) {
    Vector h;
    Vector z;
    if (hidden_ == 0) {
        z = dense_forward(x, params_.value("proxy.W"), params_.value("proxy.b"));
    } else {
        h = dense_forward(x, params_.value("proxy.W1"), params_.value("proxy.b1"));
        for (auto& v : h) v = std::max(0.0, v);
        z = dense_forward(h, params_.value("proxy.W"), params_.value("proxy.b"));
    }
    const double loss = log_sum_exp(z) - z[label];
    Vector dz = softmax(z);
    dz[label] -= 1.0;
    for (auto& v : dz) v *= scale;
    if (hidden_ == 0) {
        dense_backward(x, params_.value("proxy.W"), dz, params_.grad("proxy.W"), params_.grad("proxy.b"));
    } else {
        Vector dh = dense_backward(h, params_.value("proxy.W"), dz, params_.grad("proxy.W"), params_.grad("proxy.b"));
        for (std::size_t j = 0; j < dh.size(); ++j) {
            if (h[j] <= 0.0) dh[j] = 0.0;
        }
        dense_backward(x, params_.value("proxy.W1"), dh, params_.grad("proxy.W1"), params_.grad("proxy.b1"));
    }
    return loss;
}

ProxyTrainResult train_proxy(const std::vector<VideoSample>& train_set, std::size_t num_classes,
                             const TrainConfig& cfg, std::size_t hidden, std::uint64_t seed) {
    if (train_set.empty()) throw DomainError("train_proxy: empty training set");
    Rng rng(seed);
    ProxyTrainResult result{ProxyClassifier(train_set.front().dim(), num_classes, hidden, rng), {}};

    struct FrameRef {
        std::size_t video, frame;
    };
    std::vector<FrameRef> items;
    for (std::size_t v = 0; v < train_set.size(); ++v) {
        for (std::size_t f = 0; f < train_set[v].num_frames(); ++f) items.push_back({v, f});
    }
    auto& model = result.model;
    result.report = run_sgd(model.params(), items.size(), cfg, rng, [&](std::size_t item, double scale) {
        const auto& ref = items[item];
        const auto& video = train_set[ref.video];
        return model.loss_and_grad(video.frames[ref.frame].values, video.label, scale);
    });
    model.mark_trained();
    return result;
}

double frame_accuracy(const ProxyClassifier& proxy, const std::vector<VideoSample>& videos) {
    std::size_t correct = 0;
    std::size_t total = 0;
    for (const auto& v : videos) {
        for (const auto& f : v.frames) {
            correct += argmax(proxy.logits(f.values)) == v.label ? 1 : 0;
            ++total;
        }
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace framesel
