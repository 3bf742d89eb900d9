// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/global_selector.hpp"

#include <algorithm>
#include <cmath>

#include "framesel/errors.hpp"
#include "framesel/proxy.hpp"

namespace framesel {

namespace {

const std::string kLstm = "gs.lstm";

void require_column(const Matrix& m, std::size_t rows, const char* name) {
    if (m.rows() != rows || m.cols() != 1) {
        throw DimensionError(std::string(name) + " must be " + std::to_string(rows) + "x1, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

}  // namespace

PairSequence build_pairs(const VideoSample& video, Rng& rng) {
    const std::size_t n = video.num_frames();
    if (n == 0) throw DomainError("build_pairs: video has no frames");
    const std::size_t d = video.dim();
    PairSequence seq;
    seq.pairs = Matrix(n, 2 * d);
    seq.partner.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t later = n - 1 - i;
        seq.partner[i] = later == 0 ? i : i + 1 + rng.uniform_index(later);
        auto row = seq.pairs.row(i);
        const auto& a = video.frames[i].values;
        const auto& b = video.frames[seq.partner[i]].values;
        std::copy(a.begin(), a.end(), row.begin());
        std::copy(b.begin(), b.end(), row.begin() + static_cast<std::ptrdiff_t>(d));
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Model

GlobalSelector::GlobalSelector(std::size_t dim, std::size_t num_classes, const GlobalConfig& cfg, Rng& rng)
    : dim_(dim), num_classes_(num_classes), cfg_(cfg) {
    if (dim == 0 || num_classes < 2 || cfg.hidden == 0) {
        throw ConfigError("global selector needs D > 0, C >= 2 and Ch > 0");
    }
    if (cfg.pair_reps == 0) throw ConfigError("global selector needs at least one pairing repetition");
    const std::size_t z = 2 * dim;
    const std::size_t ch = cfg.hidden;
    params_.add("gs.U", uniform_init(z, 1, z, rng));
    params_.add("gs.theta1", uniform_init(2 * z, 1, 2 * z, rng));
    add_lstm_params(params_, kLstm, z, ch, rng);
    params_.add("gs.V", uniform_init(ch, 1, ch, rng));
    params_.add("gs.b", Matrix(1, 1));
    params_.add("gs.theta2", uniform_init(2 * z, 1, 2 * z, rng));
    params_.add("gs.head.W", uniform_init(ch, num_classes, ch, rng));
    params_.add("gs.head.b", Matrix(1, num_classes));
}

GlobalSelector GlobalSelector::from_params(ParamStore params, const GlobalConfig& cfg) {
    for (const char* name : {"gs.U", "gs.theta1", "gs.lstm.Wx", "gs.lstm.Wh", "gs.lstm.b", "gs.V", "gs.b", "gs.theta2",
                             "gs.head.W", "gs.head.b"}) {
        if (!params.contains(name)) throw ConfigError(std::string("global selector is missing ") + name);
    }
    GlobalSelector g;
    const std::size_t z = params.value("gs.U").rows();
    if (z == 0 || z % 2 != 0) throw ConfigError("gs.U must have an even, positive row count");
    g.dim_ = z / 2;
    g.num_classes_ = params.value("gs.head.W").cols();
    g.cfg_ = cfg;
    g.cfg_.hidden = params.value("gs.V").rows();
    const std::size_t ch = g.cfg_.hidden;
    require_column(params.value("gs.theta1"), 2 * z, "gs.theta1");
    require_column(params.value("gs.theta2"), 2 * z, "gs.theta2");
    if (params.value("gs.lstm.Wx").rows() != z || params.value("gs.lstm.Wx").cols() != 4 * ch ||
        params.value("gs.lstm.Wh").rows() != ch || params.value("gs.head.W").rows() != ch) {
        throw ConfigError("global selector parameters have inconsistent shapes");
    }
    g.params_ = std::move(params);
    return g;
}

// ---------------------------------------------------------------------------
// Forward stages

SelfAttention self_attention(const Matrix& pairs, const Matrix& u) {
    require_column(u, pairs.cols(), "U");
    const std::size_t n = pairs.rows();
    SelfAttention out;
    out.alpha.resize(n);
    out.pooled.assign(pairs.cols(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.alpha[i] = sigmoid(dot(pairs.row(i), u.data()));
        total += out.alpha[i];
        auto z = pairs.row(i);
        for (std::size_t c = 0; c < z.size(); ++c) out.pooled[c] += out.alpha[i] * z[c];
    }
    for (auto& v : out.pooled) v /= total;
    return out;
}

RelationAttention relation_attention(const Matrix& pairs, std::span<const double> pooled, const Matrix& theta1,
                                     bool normalize) {
    const std::size_t n = pairs.rows();
    const std::size_t z = pairs.cols();
    require_column(theta1, 2 * z, "theta1");
    if (pooled.size() != z) throw DimensionError("relation_attention: pooled vector width differs from pairs");
    auto theta = theta1.data();
    const double global_term = dot(pooled, theta.subspan(z));
    RelationAttention out;
    out.beta.resize(n);
    out.omega = Matrix(n, z);
    Vector running(z, 0.0);
    double weight = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        auto zt = pairs.row(t);
        out.beta[t] = sigmoid(dot(zt, theta.first(z)) + global_term);
        weight += out.beta[t];
        auto row = out.omega.row(t);
        for (std::size_t c = 0; c < z; ++c) {
            running[c] += out.beta[t] * zt[c];
            row[c] = normalize ? running[c] / weight : running[c];
        }
    }
    return out;
}

TemporalPass temporal_pass(const Matrix& omega, const LstmWeights& lstm, const Matrix& v, const Matrix& b) {
    const std::size_t n = omega.rows();
    const std::size_t ch = lstm.hidden();
    require_column(v, ch, "V");
    if (b.size() != 1) throw DimensionError("temporal bias must be 1x1");
    TemporalPass out;
    out.h = Matrix(n, ch);
    out.m = Matrix(n, ch);
    out.scores.resize(n);
    out.cache.resize(n);
    Vector h_prev(ch, 0.0);
    Vector m_prev(ch, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        auto& c = out.cache[t];
        lstm_step(omega.row(t), h_prev, m_prev, lstm, c);
        std::copy(c.h.begin(), c.h.end(), out.h.row(t).begin());
        std::copy(c.m.begin(), c.m.end(), out.m.row(t).begin());
        out.scores[t] = dot(c.h, v.data()) + b.data()[0];
        h_prev = c.h;
        m_prev = c.m;
    }
    out.lambda = softmax(out.scores);
    return out;
}

RelationalTemporal relational_temporal(const Matrix& omega, std::span<const double> lambda, const Matrix& theta2) {
    const std::size_t n = omega.rows();
    const std::size_t z = omega.cols();
    require_column(theta2, 2 * z, "theta2");
    if (lambda.size() != n) throw DimensionError("relational_temporal: lambda length differs from omega rows");
    RelationalTemporal out;
    out.pooled.assign(z, 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        total += lambda[t];
        auto w = omega.row(t);
        for (std::size_t c = 0; c < z; ++c) out.pooled[c] += lambda[t] * w[c];
    }
    for (auto& p : out.pooled) p /= total;
    auto theta = theta2.data();
    const double global_term = dot(out.pooled, theta.subspan(z));
    out.gamma.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.gamma[t] = sigmoid(dot(omega.row(t), theta.first(z)) + global_term);
    return out;
}

Classification classify(std::span<const double> gamma, const Matrix& h, const Matrix& head_w, const Matrix& head_b) {
    if (gamma.size() != h.rows()) throw DimensionError("classify: gamma length differs from hidden-state count");
    Classification out;
    out.content.assign(h.cols(), 0.0);
    for (std::size_t i = 0; i < h.rows(); ++i) {
        auto hi = h.row(i);
        for (std::size_t c = 0; c < hi.size(); ++c) out.content[c] += gamma[i] * hi[c];
    }
    out.logits = dense_forward(out.content, head_w, head_b);
    out.prediction = argmax(out.logits);
    return out;
}

GlobalForwardTrace global_forward(const GlobalSelector& model, const PairSequence& pairs) {
    const ParamStore& p = model.params();
    if (pairs.pairs.cols() != 2 * model.dim()) {
        throw DimensionError("global_forward: pair width " + std::to_string(pairs.pairs.cols()) +
                             " does not match model 2D=" + std::to_string(2 * model.dim()));
    }
    GlobalForwardTrace tr;
    tr.pairs = pairs;
    tr.attention = self_attention(pairs.pairs, p.value("gs.U"));
    tr.relation = relation_attention(pairs.pairs, tr.attention.pooled, p.value("gs.theta1"),
                                     model.config().normalize_omega);
    tr.temporal = temporal_pass(tr.relation.omega, LstmWeights::from(p, kLstm), p.value("gs.V"), p.value("gs.b"));
    tr.relational = relational_temporal(tr.relation.omega, tr.temporal.lambda, p.value("gs.theta2"));
    tr.output = classify(tr.relational.gamma, tr.temporal.h, p.value("gs.head.W"), p.value("gs.head.b"));
    return tr;
}

GlobalForwardTrace global_forward(const GlobalSelector& model, const VideoSample& video, Rng& rng) {
    return global_forward(model, build_pairs(video, rng));
}

double loss_cls(std::span<const double> logits, std::size_t label, const Matrix& theta1, const Matrix& theta2,
                double reg) {
    if (label >= logits.size()) throw DomainError("loss_cls: label outside the logit range");
    if (reg < 0.0) throw DomainError("loss_cls: regulariser weight must be non-negative");
    return log_sum_exp(logits) - logits[label] + reg * (theta1.squared_norm() + theta2.squared_norm());
}

// ---------------------------------------------------------------------------
// Backward

double global_loss_and_grad(GlobalSelector& model, const PairSequence& pairs, std::size_t label, double scale) {
    const GlobalForwardTrace tr = global_forward(model, pairs);
    ParamStore& p = model.params();
    const double reg = model.config().reg;
    const double loss = loss_cls(tr.output.logits, label, p.value("gs.theta1"), p.value("gs.theta2"), reg);

    const std::size_t n = pairs.size();
    const std::size_t z = pairs.pairs.cols();
    const std::size_t ch = model.hidden();
    const Matrix& pairs_m = pairs.pairs;
    const Matrix& omega = tr.relation.omega;
    const Vector& alpha = tr.attention.alpha;
    const Vector& beta = tr.relation.beta;
    const Vector& lambda = tr.temporal.lambda;
    const Vector& gamma = tr.relational.gamma;
    const Matrix& h = tr.temporal.h;

    // Classifier head.
    Vector dlogits = softmax(tr.output.logits);
    dlogits[label] -= 1.0;
    for (auto& v : dlogits) v *= scale;
    const Vector dcontent =
        dense_backward(tr.output.content, p.value("gs.head.W"), dlogits, p.grad("gs.head.W"), p.grad("gs.head.b"));

    // Content vector c = sum gamma_t h_t.
    Matrix dh(n, ch);
    Vector dgamma_pre(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double dgamma = dot(dcontent, h.row(t));
        dgamma_pre[t] = dgamma * gamma[t] * (1.0 - gamma[t]);
        auto row = dh.row(t);
        for (std::size_t c = 0; c < ch; ++c) row[c] = gamma[t] * dcontent[c];
    }

    // gamma_t = sigmoid(omega_t . theta2a + Z'' . theta2b).
    auto theta2 = p.value("gs.theta2").data();
    auto gtheta2 = p.grad("gs.theta2").data();
    Matrix domega(n, z);
    Vector dpooled2(z, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        auto w = omega.row(t);
        auto dw = domega.row(t);
        for (std::size_t c = 0; c < z; ++c) {
            gtheta2[c] += dgamma_pre[t] * w[c];
            gtheta2[z + c] += dgamma_pre[t] * tr.relational.pooled[c];
            dw[c] += dgamma_pre[t] * theta2[c];
            dpooled2[c] += dgamma_pre[t] * theta2[z + c];
        }
    }

    // Z'' = sum lambda_t omega_t (lambda sums to one).
    Vector dlambda(n);
    for (std::size_t t = 0; t < n; ++t) {
        dlambda[t] = dot(dpooled2, omega.row(t));
        auto dw = domega.row(t);
        for (std::size_t c = 0; c < z; ++c) dw[c] += lambda[t] * dpooled2[c];
    }

    // lambda = softmax(e), e_t = V . h_t + b.
    double weighted = 0.0;
    for (std::size_t t = 0; t < n; ++t) weighted += lambda[t] * dlambda[t];
    auto v = p.value("gs.V").data();
    auto gv = p.grad("gs.V").data();
    auto& gb = p.grad("gs.b").data()[0];
    for (std::size_t t = 0; t < n; ++t) {
        const double de = lambda[t] * (dlambda[t] - weighted);
        gb += de;
        auto ht = h.row(t);
        auto dht = dh.row(t);
        for (std::size_t c = 0; c < ch; ++c) {
            gv[c] += de * ht[c];
            dht[c] += de * v[c];
        }
    }

    // LSTM, backwards through time.
    const LstmWeights lstm = LstmWeights::from(p, kLstm);
    const LstmGradRefs lstm_grads = LstmGradRefs::from(p, kLstm);
    Vector dh_next(ch, 0.0);
    Vector dm_next(ch, 0.0);
    Vector dx, dh_prev, dm_prev;
    for (std::size_t t = n; t-- > 0;) {
        Vector dh_total(ch);
        auto dht = dh.row(t);
        for (std::size_t c = 0; c < ch; ++c) dh_total[c] = dht[c] + dh_next[c];
        lstm_step_backward(tr.temporal.cache[t], lstm, dh_total, dm_next, lstm_grads, dx, dh_prev, dm_prev);
        auto dw = domega.row(t);
        for (std::size_t c = 0; c < z; ++c) dw[c] += dx[c];
        dh_next = dh_prev;
        dm_next = dm_prev;
    }

    // omega_t = sum_{i<=t} beta_i Z_i, optionally divided by B_t = sum_{i<=t} beta_i.
    Vector dbeta(n, 0.0);
    if (!model.config().normalize_omega) {
        Vector suffix(z, 0.0);
        for (std::size_t i = n; i-- > 0;) {
            auto dw = domega.row(i);
            for (std::size_t c = 0; c < z; ++c) suffix[c] += dw[c];
            dbeta[i] = dot(suffix, pairs_m.row(i));
        }
    } else {
        // dP_t = domega_t / B_t ; dB_t = -domega_t . omega_t / B_t.
        Vector suffix_p(z, 0.0);
        double suffix_b = 0.0;
        double weight = 0.0;
        Vector cumulative(n);
        for (std::size_t t = 0; t < n; ++t) {
            weight += beta[t];
            cumulative[t] = weight;
        }
        for (std::size_t i = n; i-- > 0;) {
            auto dw = domega.row(i);
            for (std::size_t c = 0; c < z; ++c) suffix_p[c] += dw[c] / cumulative[i];
            suffix_b -= dot(dw, omega.row(i)) / cumulative[i];
            dbeta[i] = dot(suffix_p, pairs_m.row(i)) + suffix_b;
        }
    }

    // beta_i = sigmoid(Z_i . theta1a + Z' . theta1b).
    auto theta1 = p.value("gs.theta1").data();
    auto gtheta1 = p.grad("gs.theta1").data();
    Vector dpooled1(z, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double db = dbeta[i] * beta[i] * (1.0 - beta[i]);
        auto zi = pairs_m.row(i);
        for (std::size_t c = 0; c < z; ++c) {
            gtheta1[c] += db * zi[c];
            gtheta1[z + c] += db * tr.attention.pooled[c];
            dpooled1[c] += db * theta1[z + c];
        }
    }

    // Z' = sum alpha_i Z_i / sum alpha_i ; alpha_i = sigmoid(Z_i . U).
    double alpha_total = 0.0;
    for (double a : alpha) alpha_total += a;
    auto gu = p.grad("gs.U").data();
    for (std::size_t i = 0; i < n; ++i) {
        auto zi = pairs_m.row(i);
        double dalpha = 0.0;
        for (std::size_t c = 0; c < z; ++c) dalpha += dpooled1[c] * (zi[c] - tr.attention.pooled[c]);
        dalpha /= alpha_total;
        const double da = dalpha * alpha[i] * (1.0 - alpha[i]);
        for (std::size_t c = 0; c < z; ++c) gu[c] += da * zi[c];
    }

    // Regulariser on theta1 and theta2.
    for (std::size_t k = 0; k < theta1.size(); ++k) gtheta1[k] += scale * 2.0 * reg * theta1[k];
    for (std::size_t k = 0; k < theta2.size(); ++k) gtheta2[k] += scale * 2.0 * reg * theta2[k];

    return loss;
}

// ---------------------------------------------------------------------------
// Training and scoring

GlobalTrainResult train_global(const std::vector<VideoSample>& train_set, std::size_t num_classes,
                               const GlobalConfig& gcfg, const TrainConfig& cfg, std::uint64_t seed) {
    if (train_set.empty()) throw DomainError("train_global: empty training set");
    Rng rng(seed);
    GlobalTrainResult result{GlobalSelector(train_set.front().dim(), num_classes, gcfg, rng), {}};
    auto& model = result.model;

    std::vector<PairSequence> pairings(train_set.size());
    auto redraw = [&](std::size_t epoch) {
        Rng pair_rng(mix_seed(seed, 0x5041495253ULL + epoch));
        for (std::size_t i = 0; i < train_set.size(); ++i) pairings[i] = build_pairs(train_set[i], pair_rng);
    };
    result.report = run_sgd(
        model.params(), train_set.size(), cfg, rng,
        [&](std::size_t i, double scale) { return global_loss_and_grad(model, pairings[i], train_set[i].label, scale); },
        redraw);
    return result;
}

std::uint64_t pairing_seed(const std::string& video_id, std::uint64_t seed_base, std::size_t rep) {
    return mix_seed(mix_seed(hash_string(video_id), seed_base), rep);
}

Vector score_global(const GlobalSelector& model, const VideoSample& video, std::uint64_t seed_base, std::size_t reps) {
    if (reps == 0) reps = model.config().pair_reps;
    Vector mean(video.num_frames(), 0.0);
    for (std::size_t r = 0; r < reps; ++r) {
        Rng rng(pairing_seed(video.id, seed_base, r));
        const auto tr = global_forward(model, video, rng);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += tr.gamma()[i];
    }
    for (auto& v : mean) v /= static_cast<double>(reps);
    return mean;
}

GradCheckReport global_gradient_check_report(const GradCheckSpec& spec) {
    Rng rng(spec.seed);
    GlobalConfig gcfg;
    gcfg.hidden = spec.hidden;
    gcfg.reg = spec.reg;
    gcfg.normalize_omega = spec.normalize_omega;
    GlobalSelector model(spec.dim, spec.num_classes, gcfg, rng);
    // Move every parameter (biases included) off its initial value.
    for (auto& [_, e] : model.params().entries()) {
        for (auto& v : e.value.data()) v += rng.uniform(-0.3, 0.3);
    }

    VideoSample video;
    video.id = "gradcheck";
    video.label = static_cast<std::uint32_t>(rng.uniform_index(spec.num_classes));
    for (std::size_t i = 0; i < spec.num_frames; ++i) {
        Vector x(spec.dim);
        for (auto& v : x) v = rng.normal();
        video.frames.push_back(FrameFeature::from_parts(x, {}));
    }
    const PairSequence pairs = build_pairs(video, rng);

    return grad_check_report(
        [&](ParamStore&) { return global_loss_and_grad(model, pairs, video.label, 1.0); }, model.params(), spec.eps);
}

double global_gradient_check(const GradCheckSpec& spec) { return global_gradient_check_report(spec).max_rel_error; }

}  // namespace framesel
