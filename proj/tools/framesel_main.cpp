// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <charconv>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "framesel/commands.hpp"
#include "framesel/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::vector<std::size_t> parse_sweep(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string::npos) end = text.size();
        std::size_t value = 0;
        const char* first = text.data() + pos;
        const char* last = text.data() + end;
        while (first < last && *first == ' ') ++first;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last) throw framesel::ConfigError("--sweep expects comma-separated integers");
        out.push_back(value);
        pos = end + 1;
    }
    return out;
}

/// Help text of the subcommand being parsed, or of the whole app.
std::string usage_for(const CLI::App& app) {
    const auto subs = app.get_subcommands();
    return subs.empty() ? app.help() : subs.front()->help();
}

}  // namespace

int main(int argc, char** argv) {
    using framesel::RunConfig;
    using framesel::Strategy;

    RunConfig cfg;
    std::string strategy = "smart";
    std::string sweep = "4,8,16,24,32,40";
    std::string omega = "normalized";
    std::string split = "test";

    CLI::App app{"Budgeted frame selection: synthetic data, training, selection and evaluation"};
    app.set_config("--config", "", "INI/TOML file with option values (command-line flags take precedence)");
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str();

    auto add_training = [&](CLI::App* sub) {
        sub->add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str();
        sub->add_option("--lr", cfg.train.lr, "Initial learning rate (x0.1 every --lr-step epochs)")->capture_default_str();
        sub->add_option("--momentum", cfg.train.momentum, "SGD momentum")->capture_default_str();
        sub->add_option("--batch", cfg.train.batch_size, "Minibatch size")->capture_default_str();
        sub->add_option("--lr-step", cfg.train.lr_step_epochs, "Epochs between learning-rate decays")->capture_default_str();
        sub->add_option("--eps-reg", cfg.global.reg, "Regulariser weight on the relation parameters")->capture_default_str();
        sub->add_option("--hidden", cfg.global.hidden, "LSTM width of the global selector")->capture_default_str();
        sub->add_option("--mlp-hidden", cfg.mlp_hidden, "Hidden width of the single-frame selector")->capture_default_str();
        sub->add_option("--proxy-hidden", cfg.proxy_hidden, "Hidden width of the proxy classifier (0 = linear)")
            ->capture_default_str();
    };
    auto add_omega = [&](CLI::App* sub) {
        sub->add_option("--omega", omega, "Relation sum: normalized or cumulative")
            ->check(CLI::IsMember({"normalized", "cumulative"}))
            ->capture_default_str();
    };
    auto add_scoring = [&](CLI::App* sub) {
        sub->add_option("--data", cfg.data, "Dataset directory holding train/test manifests")->capture_default_str();
        sub->add_option("--models", cfg.models, "Directory written by 'train'")->capture_default_str();
        sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
        sub->add_option("--pair-reps", cfg.global.pair_reps, "Pairings averaged per video")->capture_default_str();
        sub->add_option("--split", split, "Manifest to score")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    synth->add_option("--frames", cfg.synth.num_frames, "Frames per video (N)")->capture_default_str();
    synth->add_option("--dim", cfg.synth.dim, "Feature dimension (D)")->capture_default_str();
    synth->add_option("--classes", cfg.synth.num_classes, "Class count (C)")->capture_default_str();
    synth->add_option("--informative", cfg.synth.informative_fraction, "Fraction of informative frames")
        ->capture_default_str();
    synth->add_option("--noise", cfg.synth.noise_sigma, "Per-frame noise std")->capture_default_str();
    synth->add_option("--background", cfg.synth.background_scale, "Distractor background std")->capture_default_str();
    synth->add_option("--train-videos", cfg.synth.train_videos, "Training videos")->capture_default_str();
    synth->add_option("--test-videos", cfg.synth.test_videos, "Test videos")->capture_default_str();

    auto* train = app.add_subcommand("train", "Train the proxy classifier and both selectors");
    train->add_option("--data", cfg.data, "Dataset directory")->capture_default_str();
    train->add_option("--out", cfg.out, "Model output directory")->capture_default_str();
    train->add_option("--pair-reps", cfg.global.pair_reps, "Pairings averaged per video at scoring time")
        ->capture_default_str();
    add_training(train);
    add_omega(train);

    auto* select = app.add_subcommand("select", "Score frames and write per-video selections");
    add_scoring(select);
    select->add_option("--n", cfg.budget, "Frame budget")->capture_default_str();
    select->add_option("--strategy", strategy, "smart, random or uniform")
        ->check(CLI::IsMember({"smart", "random", "uniform"}))
        ->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Accuracy/FLOPs sweep over budgets for every strategy");
    add_scoring(eval);
    eval->add_option("--sweep", sweep, "Comma-separated budgets")->capture_default_str();
    eval->add_option("--random-runs", cfg.random_runs, "Seeds averaged for the random baseline")->capture_default_str();

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the global selector gradient");
    gradcheck->add_option("--eps", cfg.gradcheck_eps, "Central-difference step")->capture_default_str();
    gradcheck->add_option("--tolerance", cfg.gradcheck_tolerance, "Maximum relative error")->capture_default_str();
    add_omega(gradcheck);

    try {
        app.parse(argc, argv);
        cfg.strategy = *framesel::parse_strategy(strategy);
        cfg.sweep = parse_sweep(sweep);
        cfg.global.normalize_omega = omega == "normalized";
        cfg.split = split == "train" ? framesel::Split::Train : framesel::Split::Test;
        cfg.validate();
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << usage_for(app);
        return kExitUsage;
    } catch (const framesel::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << usage_for(app);
        return kExitUsage;
    }

    try {
        if (*synth) framesel::cmd_synth(cfg, std::cout);
        if (*train) framesel::cmd_train(cfg, std::cout);
        if (*select) framesel::cmd_select(cfg, std::cout);
        if (*eval) framesel::cmd_eval(cfg, std::cout);
        if (*gradcheck) return framesel::cmd_gradcheck(cfg, std::cout) ? kExitOk : kExitNumeric;
    } catch (const framesel::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
