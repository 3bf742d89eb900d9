// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "framesel/commands.hpp"
#include "framesel/errors.hpp"
#include "framesel/proxy.hpp"
#include "framesel/single_selector.hpp"
#include "test_util.hpp"

using namespace framesel;

namespace {

// Average ranks, so tied values share a rank.
Vector ranks(const Vector& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    Vector r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

double pearson(const Vector& a, const Vector& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

double spearman(const Vector& a, const Vector& b) { return pearson(ranks(a), ranks(b)); }

ProxyClassifier uniform_proxy(std::size_t dim, std::size_t classes) {
    Rng r(1);
    ProxyClassifier p(dim, classes, 0, r);
    p.params().value("proxy.W").fill(0.0);
    p.mark_trained();
    return p;
}

}  // namespace

TEST_SUITE("oracle targets") {
    TEST_CASE("untrained proxy is a state error") {
        Rng r(1);
        const ProxyClassifier p(3, 4, 0, r);
        const VideoSample v = framesel::testing::random_video(2, 3, 0, r);
        CHECK_THROWS_AS(oracle_frame_targets(p, v), StateError);
    }

    TEST_CASE("uniform proxy gives 1/C") {
        Rng r(2);
        const ProxyClassifier p = uniform_proxy(3, 4);
        for (double t : oracle_frame_targets(p, framesel::testing::random_video(5, 3, 2, r))) {
            CHECK(t == doctest::Approx(0.25).epsilon(1e-15));
        }
    }

    TEST_CASE("separable frame gives a target near one") {
        Rng r(3);
        ProxyClassifier p = uniform_proxy(2, 3);
        p.params().value("proxy.W") = Matrix(2, 3, Vector{50, 0, 0, 0, 50, 0});
        p.mark_trained();
        VideoSample v;
        v.label = 1;
        v.frames.push_back(FrameFeature::from_parts(Vector{0.0, 1.0}, {}));
        CHECK(oracle_frame_targets(p, v)[0] > 1.0 - 1e-12);
    }
}

TEST_SUITE("single-frame mlp") {
    TEST_CASE("hand-computed toy network") {
        ParamStore p;
        p.add("sfs.W1", Matrix(2, 2, Vector{1.0, -1.0, 0.5, 2.0}));
        p.add("sfs.b1", Matrix(1, 2, Vector{0.1, -3.0}));
        p.add("sfs.W2", Matrix(2, 1, Vector{0.7, 5.0}));
        p.add("sfs.b2", Matrix(1, 1, Vector{-0.2}));
        const SingleFrameMLP m = SingleFrameMLP::from_params(p);
        // hidden pre = [1*1 + 2*0.5 + 0.1, 1*-1 + 2*2 - 3] = [2.1, 0]; relu -> [2.1, 0]
        const double expected = 1.0 / (1.0 + std::exp(-(0.7 * 2.1 - 0.2)));
        CHECK(std::abs(m.score(Vector{1.0, 2.0}) - expected) < 1e-15);
        CHECK_THROWS_AS(m.score(Vector{1.0}), DimensionError);
    }

    TEST_CASE("scores are per-frame and in (0,1)") {
        Rng r(4);
        const SingleFrameMLP m(5, 8, r);
        const VideoSample v = framesel::testing::random_video(9, 5, 0, r);
        const Vector delta = score_single(m, v);
        for (double d : delta) {
            CHECK(d > 0.0);
            CHECK(d < 1.0);
        }
        VideoSample shuffled = v;
        std::vector<std::size_t> perm(v.num_frames());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        r.shuffle(perm);
        for (std::size_t i = 0; i < perm.size(); ++i) shuffled.frames[i] = v.frames[perm[i]];
        const Vector permuted = score_single(m, shuffled);
        for (std::size_t i = 0; i < perm.size(); ++i) CHECK(permuted[i] == delta[perm[i]]);

        VideoSample twins;
        twins.frames = {v.frames[0], v.frames[0]};
        const Vector same = score_single(m, twins);
        CHECK(same[0] == same[1]);
    }

    TEST_CASE("gradient matches finite differences") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng r(seed);
            SingleFrameMLP m(4, 6, r);
            const Vector x = framesel::testing::random_vector(4, r, 2.0);
            const double target = r.uniform();
            const auto rep =
                grad_check_report([&](ParamStore&) { return m.loss_and_grad(x, target, 1.0); }, m.params(), 1e-5);
            std::string why;
            CHECK_MESSAGE(framesel::testing::gradients_agree(rep, 1e-4, 1e-5, &why), why);
        }
    }
}

TEST_SUITE("single-frame training") {
    TEST_CASE("constant targets converge to 0.5") {
        Rng r(5);
        const VideoSample v = framesel::testing::random_video(200, 4, 0, r);
        std::vector<const FrameFeature*> frames;
        for (const auto& f : v.frames) frames.push_back(&f);
        const Vector targets(frames.size(), 0.5);
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.lr = 0.05;
        cfg.lr_step_epochs = 0;
        const auto res = train_single_on_targets(frames, targets, cfg, 16, 3);
        CHECK(res.final_mse < 1e-4);
        for (const auto& f : v.frames) CHECK(std::abs(res.model.score(f.values) - 0.5) < 0.02);
    }

    TEST_CASE("lr 0 leaves parameters unchanged") {
        Rng r(6);
        const VideoSample v = framesel::testing::random_video(30, 4, 0, r);
        std::vector<const FrameFeature*> frames;
        for (const auto& f : v.frames) frames.push_back(&f);
        const Vector targets(frames.size(), 0.9);
        TrainConfig cfg;
        cfg.epochs = 1;
        cfg.lr = 0.0;
        const auto trained = train_single_on_targets(frames, targets, cfg, 8, 9);
        Rng same(9);
        const SingleFrameMLP fresh(4, 8, same);
        CHECK(trained.model.params().same_values(fresh.params()));
    }

    TEST_CASE("fixed seed reproduces the parameters") {
        Rng r(7);
        const VideoSample v = framesel::testing::random_video(40, 3, 0, r);
        std::vector<const FrameFeature*> frames;
        Vector targets;
        for (const auto& f : v.frames) {
            frames.push_back(&f);
            targets.push_back(r.uniform());
        }
        TrainConfig cfg;
        cfg.epochs = 3;
        const auto a = train_single_on_targets(frames, targets, cfg, 8, 21);
        const auto b = train_single_on_targets(frames, targets, cfg, 8, 21);
        CHECK(encode_params(a.model.params()) == encode_params(b.model.params()));
    }

    TEST_CASE("predicted confidence tracks the oracle on the default synthetic set") {
        const SynthConfig scfg;
        const auto ds = synth_dataset(scfg, 42);
        const auto proxy = train_proxy(ds.train, scfg.num_classes, TrainConfig{}, 0, stage_seed(42, 1));
        const auto single = train_single(ds.train, proxy.model, TrainConfig{}, 64, stage_seed(42, 2));
        Vector predicted, oracle;
        double informative_sum = 0.0, distractor_sum = 0.0;
        std::size_t informative_count = 0, distractor_count = 0;
        for (std::size_t i = 0; i < ds.test.size(); ++i) {
            const Vector d = score_single(single.model, ds.test[i]);
            const Vector t = oracle_frame_targets(proxy.model, ds.test[i]);
            predicted.insert(predicted.end(), d.begin(), d.end());
            oracle.insert(oracle.end(), t.begin(), t.end());
            for (std::size_t f = 0; f < d.size(); ++f) {
                if (ds.test_informative[i][f]) {
                    informative_sum += d[f];
                    ++informative_count;
                } else {
                    distractor_sum += d[f];
                    ++distractor_count;
                }
            }
        }
        const double rho = spearman(predicted, oracle);
        MESSAGE("test-set Spearman correlation: " << rho);
        // Frozen from the measured 0.471. Distractor targets depend on the
        // video label, which a per-frame model never sees, so within-group
        // order is unpredictable and the pooled correlation stays near 0.48.
        CHECK(rho >= 0.45);
        CHECK(informative_sum / static_cast<double>(informative_count) >
              distractor_sum / static_cast<double>(distractor_count) + 0.2);
    }

    TEST_CASE("spearman helper") {
        CHECK(spearman(Vector{1, 2, 3, 4}, Vector{10, 20, 30, 40}) == doctest::Approx(1.0));
        CHECK(spearman(Vector{1, 2, 3, 4}, Vector{4, 3, 2, 1}) == doctest::Approx(-1.0));
        CHECK(ranks(Vector{5, 1, 5, 2}) == Vector{3.5, 1, 3.5, 2});
    }
}
