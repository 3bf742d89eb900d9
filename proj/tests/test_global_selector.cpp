// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "framesel/errors.hpp"
#include "framesel/global_selector.hpp"
#include "test_util.hpp"

using namespace framesel;
using framesel::testing::random_matrix;
using framesel::testing::random_vector;
using framesel::testing::random_video;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

GlobalSelector random_model(std::size_t dim, std::size_t classes, std::size_t hidden, bool normalize, Rng& rng,
                            double jitter = 0.3) {
    GlobalConfig cfg;
    cfg.hidden = hidden;
    cfg.reg = 0.01;
    cfg.normalize_omega = normalize;
    GlobalSelector m(dim, classes, cfg, rng);
    for (auto& [_, e] : m.params().entries()) {
        for (auto& v : e.value.data()) v += rng.uniform(-jitter, jitter);
    }
    return m;
}

void check_hull(std::span<const double> pooled, const Matrix& sources) {
    for (std::size_t c = 0; c < pooled.size(); ++c) {
        double lo = sources(0, c), hi = sources(0, c);
        for (std::size_t r = 1; r < sources.rows(); ++r) {
            lo = std::min(lo, sources(r, c));
            hi = std::max(hi, sources(r, c));
        }
        const double slack = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
        CHECK(pooled[c] >= lo - slack);
        CHECK(pooled[c] <= hi + slack);
    }
}

}  // namespace

TEST_SUITE("pairs") {
    TEST_CASE("single frame pairs with itself") {
        Rng r(1);
        const VideoSample v = random_video(1, 3, 0, r);
        const PairSequence p = build_pairs(v, r);
        REQUIRE(p.size() == 1);
        CHECK(p.partner[0] == 0);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(p.pairs(0, c) == v.frames[0].values[c]);
            CHECK(p.pairs(0, 3 + c) == v.frames[0].values[c]);
        }
    }

    TEST_CASE("two frames are forced") {
        Rng r(2);
        const VideoSample v = random_video(2, 2, 0, r);
        for (int i = 0; i < 20; ++i) CHECK(build_pairs(v, r).partner == std::vector<std::size_t>{1, 1});
    }

    TEST_CASE("partners are strictly later except the last frame") {
        Rng r(3);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + r.uniform_index(15);
            const VideoSample v = random_video(n, 2, 0, r);
            const PairSequence p = build_pairs(v, r);
            CHECK(p.pairs.cols() == 4);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                CHECK(p.partner[i] > i);
                CHECK(p.partner[i] < n);
            }
            CHECK(p.partner[n - 1] == n - 1);
        }
    }

    TEST_CASE("first partner is uniform over later frames") {
        Rng r(4);
        const VideoSample v = random_video(5, 1, 0, r);
        std::vector<double> counts(4, 0.0);
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) counts[build_pairs(v, r).partner[0] - 1] += 1.0;
        double chi2 = 0.0;
        for (double c : counts) chi2 += (c - draws / 4.0) * (c - draws / 4.0) / (draws / 4.0);
        // 3 degrees of freedom: p = 0.01 at 11.345
        CHECK(chi2 < 11.345);
    }
}

TEST_SUITE("self attention") {
    TEST_CASE("identical rows pool to themselves") {
        Rng r(5);
        const Vector z = random_vector(4, r);
        Matrix pairs(3, 4);
        for (std::size_t i = 0; i < 3; ++i) std::copy(z.begin(), z.end(), pairs.row(i).begin());
        const SelfAttention a = self_attention(pairs, random_matrix(4, 1, r));
        for (std::size_t c = 0; c < 4; ++c) CHECK(a.pooled[c] == doctest::Approx(z[c]).epsilon(1e-14));
    }

    TEST_CASE("zero U gives half weights and the plain mean") {
        Rng r(6);
        const Matrix pairs = random_matrix(4, 2, r);
        const SelfAttention a = self_attention(pairs, Matrix(2, 1));
        for (double w : a.alpha) CHECK(w == 0.5);
        for (std::size_t c = 0; c < 2; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < 4; ++i) mean += pairs(i, c) / 4.0;
            CHECK(a.pooled[c] == doctest::Approx(mean).epsilon(1e-14));
        }
    }

    TEST_CASE("hand instance") {
        const Matrix pairs(2, 2, Vector{1, 0, 0, 1});
        const SelfAttention a = self_attention(pairs, Matrix(2, 1, Vector{std::log(3.0), 0.0}));
        CHECK(a.alpha[0] == doctest::Approx(0.75).epsilon(1e-15));
        CHECK(a.alpha[1] == 0.5);
        CHECK(a.pooled[0] == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(a.pooled[1] == doctest::Approx(0.4).epsilon(1e-15));
    }

    TEST_CASE("shape mismatch") {
        CHECK_THROWS_AS(self_attention(Matrix(2, 4), Matrix(3, 1)), DimensionError);
    }
}

TEST_SUITE("relation attention") {
    TEST_CASE("zero theta gives half weights and halved prefix sums") {
        Rng r(7);
        const Matrix pairs = random_matrix(4, 3, r);
        const RelationAttention ra = relation_attention(pairs, random_vector(3, r), Matrix(6, 1));
        Vector prefix(3, 0.0);
        for (std::size_t t = 0; t < 4; ++t) {
            CHECK(ra.beta[t] == 0.5);
            for (std::size_t c = 0; c < 3; ++c) {
                prefix[c] += pairs(t, c);
                CHECK(ra.omega(t, c) == doctest::Approx(0.5 * prefix[c]).epsilon(1e-14));
            }
        }
    }

    TEST_CASE("random N=3 instance against a brute-force prefix sum") {
        Rng r(8);
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix pairs = random_matrix(3, 4, r);
            const Vector pooled = random_vector(4, r);
            const Matrix theta = random_matrix(8, 1, r);
            for (bool normalize : {false, true}) {
                const RelationAttention ra = relation_attention(pairs, pooled, theta, normalize);
                for (std::size_t t = 0; t < 3; ++t) {
                    double pre = 0.0;
                    for (std::size_t c = 0; c < 4; ++c) pre += pairs(t, c) * theta(c, 0) + pooled[c] * theta(4 + c, 0);
                    CHECK(std::abs(ra.beta[t] - sig(pre)) < 1e-12);
                }
                for (std::size_t t = 0; t < 3; ++t) {
                    for (std::size_t c = 0; c < 4; ++c) {
                        double num = 0.0, den = 0.0;
                        for (std::size_t i = 0; i <= t; ++i) {
                            num += ra.beta[i] * pairs(i, c);
                            den += ra.beta[i];
                        }
                        CHECK(std::abs(ra.omega(t, c) - (normalize ? num / den : num)) < 1e-12);
                    }
                }
            }
        }
    }
}

TEST_SUITE("temporal attention") {
    TEST_CASE("equal inputs and zero weights give uniform lambda") {
        const Matrix omega(5, 2, 0.3);
        const Matrix wx(2, 12), wh(3, 12), b(1, 12);
        const TemporalPass tp = temporal_pass(omega, LstmWeights{wx, wh, b}, Matrix(3, 1), Matrix(1, 1));
        for (double l : tp.lambda) CHECK(l == doctest::Approx(0.2).epsilon(1e-15));
    }

    TEST_CASE("single step gives lambda one") {
        Rng r(9);
        const Matrix wx = random_matrix(2, 8, r), wh = random_matrix(2, 8, r), b = random_matrix(1, 8, r);
        const TemporalPass tp =
            temporal_pass(random_matrix(1, 2, r), LstmWeights{wx, wh, b}, random_matrix(2, 1, r), Matrix(1, 1, 0.7));
        CHECK(tp.lambda == Vector{1.0});
    }

    TEST_CASE("random N=3 instance against a step-by-step recomputation") {
        Rng r(10);
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix omega = random_matrix(3, 4, r);
            const Matrix wx = random_matrix(4, 12, r), wh = random_matrix(3, 12, r), b = random_matrix(1, 12, r);
            const Matrix v = random_matrix(3, 1, r), bias(1, 1, r.uniform(-1, 1));
            const TemporalPass tp = temporal_pass(omega, LstmWeights{wx, wh, b}, v, bias);
            Vector h(3, 0.0), m(3, 0.0), e;
            for (std::size_t t = 0; t < 3; ++t) {
                Vector hn, mn;
                const auto row = omega.row(t);
                framesel::testing::reference_lstm(Vector(row.begin(), row.end()), h, m, wx, wh, b, hn, mn);
                h = hn;
                m = mn;
                for (std::size_t j = 0; j < 3; ++j) {
                    CHECK(tp.h(t, j) == doctest::Approx(h[j]).epsilon(1e-13));
                    CHECK(tp.m(t, j) == doctest::Approx(m[j]).epsilon(1e-13));
                }
                e.push_back(h[0] * v(0, 0) + h[1] * v(1, 0) + h[2] * v(2, 0) + bias(0, 0));
            }
            const double z = std::exp(e[0]) + std::exp(e[1]) + std::exp(e[2]);
            for (std::size_t t = 0; t < 3; ++t) {
                CHECK(std::abs(tp.scores[t] - e[t]) < 1e-13);
                CHECK(std::abs(tp.lambda[t] - std::exp(e[t]) / z) < 1e-13);
            }
        }
    }
}

TEST_SUITE("relational temporal") {
    TEST_CASE("one-hot lambda selects that omega") {
        Rng r(11);
        const Matrix omega = random_matrix(4, 3, r);
        const RelationalTemporal rt = relational_temporal(omega, Vector{0, 0, 1, 0}, random_matrix(6, 1, r));
        for (std::size_t c = 0; c < 3; ++c) CHECK(rt.pooled[c] == omega(2, c));
    }

    TEST_CASE("zero theta gives half everywhere") {
        Rng r(12);
        const RelationalTemporal rt = relational_temporal(random_matrix(4, 3, r), Vector(4, 0.25), Matrix(6, 1));
        for (double g : rt.gamma) CHECK(g == 0.5);
    }

    TEST_CASE("hand instance") {
        const Matrix omega(3, 2, Vector{1, 0, 0, 1, 1, 1});
        const RelationalTemporal rt =
            relational_temporal(omega, Vector{0.5, 0.25, 0.25}, Matrix(4, 1, Vector{1, -1, 2, 0}));
        // Z'' = [0.75, 0.5]; global term = 2 * 0.75 = 1.5
        CHECK(rt.pooled == Vector{0.75, 0.5});
        CHECK(std::abs(rt.gamma[0] - sig(2.5)) < 1e-15);
        CHECK(std::abs(rt.gamma[1] - sig(0.5)) < 1e-15);
        CHECK(std::abs(rt.gamma[2] - sig(1.5)) < 1e-15);
    }
}

TEST_SUITE("classification head") {
    TEST_CASE("zero gamma returns the head bias") {
        Rng r(13);
        const Matrix bias = random_matrix(1, 3, r);
        const Classification c = classify(Vector(4, 0.0), random_matrix(4, 5, r), random_matrix(5, 3, r), bias);
        for (std::size_t k = 0; k < 3; ++k) CHECK(c.logits[k] == bias(0, k));
    }

    TEST_CASE("single step scales the hidden state") {
        Rng r(14);
        const Matrix h = random_matrix(1, 4, r);
        const Classification c = classify(Vector{0.3}, h, random_matrix(4, 2, r), Matrix(1, 2));
        for (std::size_t j = 0; j < 4; ++j) CHECK(c.content[j] == 0.3 * h(0, j));
    }

    TEST_CASE("random N=4 instance against a loop") {
        Rng r(15);
        const Vector gamma{0.1, 0.9, 0.4, 0.6};
        const Matrix h = random_matrix(4, 3, r), w = random_matrix(3, 5, r), b = random_matrix(1, 5, r);
        const Classification c = classify(gamma, h, w, b);
        std::size_t best = 0;
        Vector logits(5);
        for (std::size_t k = 0; k < 5; ++k) {
            logits[k] = b(0, k);
            for (std::size_t j = 0; j < 3; ++j) {
                double cj = 0.0;
                for (std::size_t i = 0; i < 4; ++i) cj += gamma[i] * h(i, j);
                logits[k] += cj * w(j, k);
            }
            if (logits[k] > logits[best]) best = k;
            CHECK(std::abs(c.logits[k] - logits[k]) < 1e-13);
        }
        CHECK(c.prediction == best);
    }

    TEST_CASE("ties go to the lower class") {
        const Classification c = classify(Vector{1.0}, Matrix(1, 1, 1.0), Matrix(1, 3), Matrix(1, 3, 0.5));
        CHECK(c.prediction == 0);
    }
}

TEST_SUITE("loss") {
    TEST_CASE("regulariser hand arithmetic") {
        const double loss = loss_cls(Vector{0.0, 0.0}, 1, Matrix(4, 1, 1.0), Matrix(4, 1, 1.0), 0.1);
        CHECK(std::abs(loss - (std::log(2.0) + 0.8)) < 1e-15);
    }

    TEST_CASE("uniform logits cost ln C") {
        CHECK(loss_cls(Vector(5, 3.0), 2, Matrix(2, 1), Matrix(2, 1), 0.0) == doctest::Approx(std::log(5.0)));
    }

    TEST_CASE("a confident correct logit costs nearly nothing") {
        CHECK(loss_cls(Vector{0.0, 60.0, 0.0}, 1, Matrix(2, 1), Matrix(2, 1), 0.0) < 1e-20);
    }

    TEST_CASE("the regulariser adds exactly reg * squared norms") {
        Rng r(16);
        for (int i = 0; i < 50; ++i) {
            const Vector logits = random_vector(4, r, 3.0);
            const Matrix t1 = random_matrix(6, 1, r), t2 = random_matrix(6, 1, r);
            const double reg = r.uniform(0.0, 0.5);
            const double diff = loss_cls(logits, 1, t1, t2, reg) - loss_cls(logits, 1, t1, t2, 0.0);
            CHECK(std::abs(diff - reg * (t1.squared_norm() + t2.squared_norm())) < 1e-12);
        }
    }

    TEST_CASE("full loss gradient on the reference instance") {
        const GradCheckSpec spec;
        CHECK(spec.num_frames == 6);
        CHECK(spec.dim == 8);
        CHECK(spec.hidden == 5);
        CHECK(spec.num_classes == 3);
        CHECK(global_gradient_check(spec) < 1e-4);
        GradCheckSpec cumulative = spec;
        cumulative.normalize_omega = false;
        CHECK(global_gradient_check(cumulative) < 1e-4);
    }

    TEST_CASE("full loss gradient on random instances") {
        for (std::uint64_t seed = 100; seed < 140; ++seed) {
            for (bool normalize : {true, false}) {
                GradCheckSpec spec;
                spec.seed = seed;
                spec.normalize_omega = normalize;
                spec.num_frames = 1 + seed % 7;
                const GradCheckReport rep = global_gradient_check_report(spec);
                std::string why;
                CHECK_MESSAGE(framesel::testing::gradients_agree(rep, 1e-4, spec.eps, &why), why);
            }
        }
    }

    TEST_CASE("a corrupted gradient fails the check") {
        Rng r(17);
        GlobalSelector model = random_model(4, 3, 3, true, r);
        const VideoSample v = random_video(5, 4, 1, r);
        const PairSequence pairs = build_pairs(v, r);
        auto honest = [&](ParamStore&) { return global_loss_and_grad(model, pairs, v.label, 1.0); };
        CHECK(grad_check(honest, model.params(), 1e-5) < 1e-4);
        for (const char* name : {"gs.U", "gs.theta1", "gs.lstm.Wh", "gs.theta2", "gs.head.W"}) {
            auto broken = [&](ParamStore& ps) {
                const double loss = global_loss_and_grad(model, pairs, v.label, 1.0);
                ps.grad(name).data()[0] *= 1.05;
                return loss;
            };
            CHECK_MESSAGE(grad_check(broken, model.params(), 1e-5) > 1e-3, std::string(name));
        }
    }

    TEST_CASE("scale multiplies the accumulated gradient") {
        Rng r(18);
        GlobalSelector model = random_model(3, 2, 4, true, r);
        const VideoSample v = random_video(4, 3, 0, r);
        const PairSequence pairs = build_pairs(v, r);
        model.params().zero_grad();
        global_loss_and_grad(model, pairs, v.label, 1.0);
        const Matrix once = model.params().grad("gs.theta1");
        model.params().zero_grad();
        global_loss_and_grad(model, pairs, v.label, 0.25);
        const Matrix quarter = model.params().grad("gs.theta1");
        for (std::size_t k = 0; k < once.size(); ++k) {
            CHECK(quarter.data()[k] == doctest::Approx(0.25 * once.data()[k]).epsilon(1e-12));
        }
    }
}

TEST_SUITE("global forward") {
    TEST_CASE("trace invariants on random instances") {
        Rng r(19);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + r.uniform_index(12), d = 1 + r.uniform_index(5);
            const GlobalSelector model = random_model(d, 2 + r.uniform_index(4), 1 + r.uniform_index(6),
                                                      r.uniform() < 0.5, r, 1.0);
            const VideoSample v = random_video(n, d, 0, r);
            const GlobalForwardTrace tr = global_forward(model, v, r);
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (double w : {tr.alpha()[i], tr.beta()[i], tr.gamma()[i]}) {
                    CHECK(w > 0.0);
                    CHECK(w < 1.0);
                }
                total += tr.lambda()[i];
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
            check_hull(tr.attention.pooled, tr.pairs.pairs);
            check_hull(tr.relational.pooled, tr.relation.omega);
            CHECK(tr.output.logits.size() == model.num_classes());
        }
    }

    TEST_CASE("deterministic under a fixed rng seed") {
        Rng r(20);
        const GlobalSelector model = random_model(3, 3, 4, true, r);
        const VideoSample v = random_video(7, 3, 2, r);
        Rng a(5), b(5);
        const auto ta = global_forward(model, v, a);
        const auto tb = global_forward(model, v, b);
        CHECK(ta.gamma() == tb.gamma());
        CHECK(ta.output.logits == tb.output.logits);
        CHECK(ta.pairs.partner == tb.pairs.partner);
    }

    TEST_CASE("width mismatch is a dimension error") {
        Rng r(21);
        const GlobalSelector model = random_model(3, 3, 4, true, r);
        const VideoSample v = random_video(4, 2, 0, r);
        CHECK_THROWS_AS(global_forward(model, v, r), DimensionError);
    }

    TEST_CASE("parameters round trip through the store format") {
        Rng r(22);
        GlobalConfig cfg;
        cfg.hidden = 6;
        const GlobalSelector model(5, 4, cfg, r);
        const GlobalSelector back = GlobalSelector::from_params(decode_params(encode_params(model.params())), cfg);
        CHECK(back.dim() == 5);
        CHECK(back.hidden() == 6);
        CHECK(back.num_classes() == 4);
        CHECK(back.params().same_values(model.params()));
        for (const auto& name : model.params().names()) CHECK(name.rfind("gs.", 0) == 0);
    }
}

TEST_SUITE("global training") {
    std::vector<VideoSample> toy_set(std::size_t count, Rng& r) {
        std::vector<VideoSample> out;
        for (std::size_t i = 0; i < count; ++i) {
            out.push_back(random_video(3 + i % 4, 3, static_cast<std::uint32_t>(i % 2), r, "toy" + std::to_string(i)));
        }
        return out;
    }

    TEST_CASE("lr 0 leaves parameters unchanged") {
        Rng r(23);
        const auto data = toy_set(10, r);
        GlobalConfig g;
        g.hidden = 4;
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 4;
        cfg.lr = 0.0;
        const auto trained = train_global(data, 2, g, cfg, 77);
        Rng init(77);
        const GlobalSelector fresh(3, 2, g, init);
        CHECK(trained.model.params().same_values(fresh.params()));
    }

    TEST_CASE("fixed seed reproduces the parameters") {
        Rng r(24);
        const auto data = toy_set(12, r);
        GlobalConfig g;
        g.hidden = 4;
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 5;
        const auto a = train_global(data, 2, g, cfg, 8);
        const auto b = train_global(data, 2, g, cfg, 8);
        CHECK(encode_params(a.model.params()) == encode_params(b.model.params()));
        CHECK(a.report.epoch_loss == b.report.epoch_loss);
    }

    TEST_CASE("default synthetic config trains below chance loss") {
        const SynthConfig scfg;
        const auto ds = synth_dataset(scfg, 42);
        const auto res = train_global(ds.train, scfg.num_classes, GlobalConfig{}, TrainConfig{}, 3);
        const double final_loss = res.report.epoch_loss.back();
        MESSAGE("final training cross-entropy: " << final_loss);
        CHECK(final_loss < std::log(static_cast<double>(scfg.num_classes)));
    }
}

TEST_SUITE("global scoring") {
    TEST_CASE("single frame: every repetition agrees") {
        Rng r(25);
        GlobalSelector model = random_model(3, 3, 4, true, r);
        const VideoSample v = random_video(1, 3, 0, r, "one");
        Rng any(0);
        const Vector gamma = global_forward(model, v, any).gamma();
        CHECK(score_global(model, v, 9, 4) == gamma);
    }

    TEST_CASE("one repetition equals one forward pass") {
        Rng r(26);
        GlobalSelector model = random_model(3, 3, 4, true, r);
        const VideoSample v = random_video(8, 3, 0, r, "clip");
        Rng rng(pairing_seed("clip", 9, 0));
        CHECK(score_global(model, v, 9, 1) == global_forward(model, v, rng).gamma());
        for (double g : score_global(model, v, 9, 4)) {
            CHECK(g > 0.0);
            CHECK(g < 1.0);
        }
    }

    TEST_CASE("averaging over repetitions shrinks the variance") {
        Rng r(27);
        GlobalSelector model = random_model(3, 3, 4, true, r, 1.5);
        const VideoSample v = random_video(10, 3, 0, r, "var");
        auto variance = [&](std::size_t reps) {
            const int bases = 400;
            Vector mean(10, 0.0), sq(10, 0.0);
            for (int b = 0; b < bases; ++b) {
                const Vector g = score_global(model, v, 1000 + static_cast<std::uint64_t>(b) * reps, reps);
                for (std::size_t i = 0; i < 10; ++i) {
                    mean[i] += g[i] / bases;
                    sq[i] += g[i] * g[i] / bases;
                }
            }
            double total = 0.0;
            for (std::size_t i = 0; i < 10; ++i) total += sq[i] - mean[i] * mean[i];
            return total;
        };
        const double ratio = variance(1) / variance(4);
        MESSAGE("variance ratio R=1 vs R=4: " << ratio);
        CHECK(ratio > 2.5);
        CHECK(ratio < 6.0);
    }
}
