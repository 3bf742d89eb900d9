// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "framesel/commands.hpp"

#include <charconv>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "binary_io.hpp"
#include "framesel/errors.hpp"
#include "framesel/eval.hpp"
#include "framesel/proxy.hpp"
#include "framesel/single_selector.hpp"

namespace framesel {

namespace fs = std::filesystem;

namespace {

enum Stage : std::uint64_t { kProxy = 1, kSingle = 2, kGlobal = 3 };

/// Shortest text that reads back to the same double.
std::string fmt_real(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string manifest_name(Split split) { return split == Split::Train ? "train.manifest" : "test.manifest"; }

void write_split(const fs::path& root, const char* name, const std::vector<VideoSample>& videos, std::uint32_t classes) {
    ensure_dir(root / name);
    Manifest manifest;
    manifest.num_classes = classes;
    for (const auto& v : videos) {
        const std::string rel = std::string(name) + "/" + v.id + ".smv";
        save_video(v, root / rel);
        manifest.paths.push_back(rel);
    }
    detail::write_file_atomic(root / (std::string(name) + ".manifest"), encode_manifest(manifest));
}

struct LoadedModels {
    ProxyClassifier proxy;
    SingleFrameMLP single;
    GlobalSelector global;
};

LoadedModels load_models(const RunConfig& cfg) {
    const std::string sidecar_text = detail::read_file(cfg.models / "gs.json");
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(sidecar_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("gs.json: ") + e.what(), 0);
    }
    GlobalConfig gcfg = cfg.global;
    try {
        gcfg.reg = sidecar.at("eps").get<double>();
        gcfg.normalize_omega = sidecar.at("omega").get<std::string>() == "normalized";
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("gs.json: ") + e.what(), 0);
    }
    LoadedModels m{ProxyClassifier::from_params(load_params(cfg.models / "proxy.smp")),
                   SingleFrameMLP::from_params(load_params(cfg.models / "sfs.smp")),
                   GlobalSelector::from_params(load_params(cfg.models / "gs.smp"), gcfg)};
    if (m.single.dim() != m.proxy.dim() || m.global.dim() != m.proxy.dim()) {
        throw ConfigError("model files disagree on the feature dimension");
    }
    if (m.global.num_classes() != m.proxy.num_classes()) throw ConfigError("model files disagree on the class count");
    return m;
}

void check_compatible(const LoadedModels& m, const Dataset& ds) {
    if (ds.meta.dim() != m.proxy.dim()) {
        throw ConfigError("dataset has D=" + std::to_string(ds.meta.dim()) + " but models expect D=" +
                          std::to_string(m.proxy.dim()));
    }
    if (ds.meta.num_classes != m.proxy.num_classes()) {
        throw ConfigError("dataset has C=" + std::to_string(ds.meta.num_classes) + " but models expect C=" +
                          std::to_string(m.proxy.num_classes()));
    }
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) { return mix_seed(seed, stage); }

void RunConfig::validate() const {
    if (budget == 0) throw ConfigError("--n must be at least 1");
    if (train.lr < 0.0) throw ConfigError("--lr must be non-negative");
    if (train.momentum < 0.0 || train.momentum >= 1.0) throw ConfigError("--momentum must lie in [0, 1)");
    if (train.batch_size == 0) throw ConfigError("--batch must be at least 1");
    if (global.reg < 0.0) throw ConfigError("--eps-reg must be non-negative");
    if (global.hidden == 0) throw ConfigError("--hidden must be at least 1");
    if (global.pair_reps == 0) throw ConfigError("--pair-reps must be at least 1");
    if (mlp_hidden == 0) throw ConfigError("--mlp-hidden must be at least 1");
    if (random_runs == 0) throw ConfigError("--random-runs must be at least 1");
    if (sweep.empty()) throw ConfigError("--sweep needs at least one budget");
    for (std::size_t n : sweep) {
        if (n == 0) throw ConfigError("--sweep budgets must be at least 1");
    }
    if (!(gradcheck_eps > 0.0) || !(gradcheck_tolerance > 0.0)) {
        throw ConfigError("gradient check eps and tolerance must be positive");
    }
    synth.validate();
}

std::string effective_config(const RunConfig& c) {
    std::string s;
    auto kv = [&](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
    auto section = [&](const char* name) { s += std::string("\n[") + name + "]\n"; };
    auto quoted = [](const std::filesystem::path& p) { return "\"" + p.generic_string() + "\""; };
    const std::string omega = c.global.normalize_omega ? "normalized" : "cumulative";
    const std::string split = c.split == Split::Train ? "train" : "test";
    std::string sweep;
    for (std::size_t k = 0; k < c.sweep.size(); ++k) sweep += (k ? "," : "") + std::to_string(c.sweep[k]);

    s += "# effective configuration; replay with: framesel --config <this file> <command>\n";
    kv("seed", std::to_string(c.seed));
    section("synth");
    kv("out", quoted(c.out));
    kv("frames", std::to_string(c.synth.num_frames));
    kv("dim", std::to_string(c.synth.dim));
    kv("classes", std::to_string(c.synth.num_classes));
    kv("informative", fmt_real(c.synth.informative_fraction));
    kv("noise", fmt_real(c.synth.noise_sigma));
    kv("background", fmt_real(c.synth.background_scale));
    kv("train-videos", std::to_string(c.synth.train_videos));
    kv("test-videos", std::to_string(c.synth.test_videos));
    section("train");
    kv("data", quoted(c.data));
    kv("out", quoted(c.out));
    kv("pair-reps", std::to_string(c.global.pair_reps));
    kv("epochs", std::to_string(c.train.epochs));
    kv("lr", fmt_real(c.train.lr));
    kv("momentum", fmt_real(c.train.momentum));
    kv("batch", std::to_string(c.train.batch_size));
    kv("lr-step", std::to_string(c.train.lr_step_epochs));
    kv("eps-reg", fmt_real(c.global.reg));
    kv("hidden", std::to_string(c.global.hidden));
    kv("mlp-hidden", std::to_string(c.mlp_hidden));
    kv("proxy-hidden", std::to_string(c.proxy_hidden));
    kv("omega", omega);
    section("select");
    kv("data", quoted(c.data));
    kv("models", quoted(c.models));
    kv("out", quoted(c.out));
    kv("pair-reps", std::to_string(c.global.pair_reps));
    kv("split", split);
    kv("n", std::to_string(c.budget));
    kv("strategy", std::string(to_string(c.strategy)));
    section("eval");
    kv("data", quoted(c.data));
    kv("models", quoted(c.models));
    kv("out", quoted(c.out));
    kv("pair-reps", std::to_string(c.global.pair_reps));
    kv("split", split);
    kv("sweep", "\"" + sweep + "\"");
    kv("random-runs", std::to_string(c.random_runs));
    section("gradcheck");
    kv("eps", fmt_real(c.gradcheck_eps));
    kv("tolerance", fmt_real(c.gradcheck_tolerance));
    kv("omega", omega);
    return s;
}

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    ensure_dir(cfg.out);
    const SynthDataset ds = synth_dataset(cfg.synth, cfg.seed);
    write_split(cfg.out, "train", ds.train, ds.meta.num_classes);
    write_split(cfg.out, "test", ds.test, ds.meta.num_classes);
    detail::write_file_atomic(cfg.out / "config.ini", effective_config(cfg));
    log << (cfg.out / "train.manifest").generic_string() << "\n" << (cfg.out / "test.manifest").generic_string() << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const Dataset ds = load_dataset(cfg.data / "train.manifest", Split::Train);
    ensure_dir(cfg.out);

    log << "training proxy classifier on " << ds.videos.size() << " videos\n";
    auto proxy = train_proxy(ds.videos, ds.meta.num_classes, cfg.train, cfg.proxy_hidden, stage_seed(cfg.seed, kProxy));
    log << "training single-frame selector\n";
    auto single = train_single(ds.videos, proxy.model, cfg.train, cfg.mlp_hidden, stage_seed(cfg.seed, kSingle));
    log << "training global selector\n";
    auto global = train_global(ds.videos, ds.meta.num_classes, cfg.global, cfg.train, stage_seed(cfg.seed, kGlobal));

    save_params(proxy.model.params(), cfg.out / "proxy.smp");
    save_params(single.model.params(), cfg.out / "sfs.smp");
    save_params(global.model.params(), cfg.out / "gs.smp");

    nlohmann::ordered_json sidecar;
    sidecar["D"] = ds.meta.dim();
    sidecar["Ch"] = cfg.global.hidden;
    sidecar["C"] = ds.meta.num_classes;
    sidecar["R"] = cfg.global.pair_reps;
    sidecar["eps"] = cfg.global.reg;
    sidecar["omega"] = cfg.global.normalize_omega ? "normalized" : "cumulative";
    detail::write_file_atomic(cfg.out / "gs.json", sidecar.dump(2) + "\n");

    std::string losses = "model\tepoch\tloss\n";
    auto append = [&](const char* name, const TrainReport& r) {
        for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
            losses += std::string(name) + "\t" + std::to_string(e) + "\t" + fmt_real(r.epoch_loss[e]) + "\n";
        }
    };
    append("proxy", proxy.report);
    append("single", single.report);
    append("global", global.report);
    detail::write_file_atomic(cfg.out / "train_log.tsv", losses);
    detail::write_file_atomic(cfg.out / "config.ini", effective_config(cfg));

    if (!global.report.epoch_loss.empty()) {
        log << "final losses: proxy " << proxy.report.epoch_loss.back() << ", single " << single.final_mse
            << " (mse), global " << global.report.epoch_loss.back() << "\n";
    }
}

void cmd_select(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const LoadedModels m = load_models(cfg);
    const Dataset ds = load_dataset(cfg.data / manifest_name(cfg.split), cfg.split);
    check_compatible(m, ds);
    ensure_dir(cfg.out);

    std::string selections;
    std::string scores = "video\tframe\tdelta\tgamma\tcombined\n";
    for (const auto& v : ds.videos) {
        const FrameScores fs_ = combine_scores(score_single(m.single, v), score_global(m.global, v, cfg.seed, cfg.global.pair_reps));
        for (std::size_t i = 0; i < v.num_frames(); ++i) {
            scores += v.id + "\t" + std::to_string(i) + "\t" + fmt_real(fs_.delta[i]) + "\t" + fmt_real(fs_.gamma[i]) +
                      "\t" + fmt_real(fs_.combined[i]) + "\n";
        }
        SelectionResult sel;
        switch (cfg.strategy) {
            case Strategy::Smart: sel = select_top_n(fs_, cfg.budget); break;
            case Strategy::Uniform: sel = baseline_uniform(v.num_frames(), cfg.budget); break;
            case Strategy::Random:
                sel = baseline_random(v.num_frames(), cfg.budget, random_selection_seed(cfg.seed, 0, v.id));
                break;
            case Strategy::All: sel = select_all(v.num_frames()); break;
        }
        selections += format_selection_line(v.id, sel) + "\n";
    }
    detail::write_file_atomic(cfg.out / "selections.tsv", selections);
    detail::write_file_atomic(cfg.out / "scores.tsv", scores);
    detail::write_file_atomic(cfg.out / "config.ini", effective_config(cfg));
    log << "wrote " << ds.videos.size() << " selections to " << (cfg.out / "selections.tsv").generic_string() << "\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const LoadedModels m = load_models(cfg);
    const Dataset ds = load_dataset(cfg.data / manifest_name(cfg.split), cfg.split);
    check_compatible(m, ds);
    ensure_dir(cfg.out);

    GlobalSelector global = m.global;
    GlobalConfig gcfg = global.config();
    gcfg.pair_reps = cfg.global.pair_reps;
    global = GlobalSelector::from_params(global.params(), gcfg);

    const Models models{m.proxy, m.single, global};
    const EvalContext ctx(ds.videos, models, EvalSeeds{cfg.seed, cfg.seed, cfg.random_runs});
    const auto rows = evaluate_sweep(ctx, cfg.sweep);

    std::string sweep = "n\tsmart\tuniform\trandom\trandom_sd\n";
    for (std::size_t k = 0; k + 3 <= rows.size(); k += 3) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\n", rows[k].budget, rows[k].accuracy,
                      rows[k + 1].accuracy, rows[k + 2].accuracy, rows[k + 2].sd);
        sweep += buf;
    }
    const std::string table = format_report_table(rows);
    detail::write_file_atomic(cfg.out / "report.tsv", format_report_tsv(rows));
    detail::write_file_atomic(cfg.out / "report.txt", table);
    detail::write_file_atomic(cfg.out / "sweep.tsv", sweep);
    detail::write_file_atomic(cfg.out / "config.ini", effective_config(cfg));
    log << table;
}

bool cmd_gradcheck(const RunConfig& cfg, std::ostream& log, double* max_error) {
    GradCheckSpec spec;
    spec.eps = cfg.gradcheck_eps;
    spec.seed = cfg.seed;
    spec.normalize_omega = cfg.global.normalize_omega;
    const double err = global_gradient_check(spec);
    if (max_error) *max_error = err;
    const bool ok = err < cfg.gradcheck_tolerance;
    char buf[200];
    std::snprintf(buf, sizeof buf, "gradcheck N=%zu D=%zu Ch=%zu C=%u eps=%g: max relative error %.3e (tolerance %g) %s\n",
                  spec.num_frames, spec.dim, spec.hidden, spec.num_classes, spec.eps, err, cfg.gradcheck_tolerance,
                  ok ? "PASS" : "FAIL");
    log << buf;
    return ok;
}

}  // namespace framesel
