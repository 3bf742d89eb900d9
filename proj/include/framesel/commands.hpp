// Copyright (C) 2026 The framesel Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "framesel/features.hpp"
#include "framesel/global_selector.hpp"
#include "framesel/nncore.hpp"
#include "framesel/selection.hpp"

namespace framesel {

/// Parameters of every subcommand. Defaults are the documented acceptance configuration.
struct RunConfig {
    std::uint64_t seed = 42;
    std::filesystem::path data = "data";
    std::filesystem::path models = "models";
    std::filesystem::path out = "out";

    SynthConfig synth;

    TrainConfig train;
    std::size_t mlp_hidden = 64;    ///< H of the single-frame selector
    std::size_t proxy_hidden = 0;   ///< 0 = linear proxy head
    GlobalConfig global;

    std::size_t budget = 8;  ///< n
    Strategy strategy = Strategy::Smart;
    std::vector<std::size_t> sweep{4, 8, 16, 24, 32, 40};
    std::size_t random_runs = 10;
    Split split = Split::Test;

    double gradcheck_tolerance = 1e-4;
    double gradcheck_eps = 1e-5;

    /// Throws ConfigError naming the first offending field.
    void validate() const;
};

/// Deterministic INI rendering of every field, echoed into output directories.
std::string effective_config(const RunConfig& cfg);

/// Seeds handed to each stage, all derived from RunConfig::seed.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage);

/// Writes <out>/{train,test}/*.smv, <out>/{train,test}.manifest and the config echo.
void cmd_synth(const RunConfig& cfg, std::ostream& log);

/// Trains proxy, single-frame and global selectors from <data>/train.manifest into <out>.
void cmd_train(const RunConfig& cfg, std::ostream& log);

/// Scores <data>/<split>.manifest with the models in <models>; writes <out>/selections.tsv and <out>/scores.tsv.
void cmd_select(const RunConfig& cfg, std::ostream& log);

/// Budget sweep for every strategy; writes <out>/report.tsv, <out>/report.txt and <out>/sweep.tsv.
void cmd_eval(const RunConfig& cfg, std::ostream& log);

/// Returns true when the global-selector gradient check passes.
bool cmd_gradcheck(const RunConfig& cfg, std::ostream& log, double* max_error = nullptr);

}  // namespace framesel
