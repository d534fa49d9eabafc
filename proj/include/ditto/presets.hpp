/// Experiment recipes (named presets bundling PDE, model, schedule, and eval
/// plans) and training-config file validation. Config files are JSON;
/// unknown keys are hard errors, defaults are resolved and echoed back.
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ditto/dataset.hpp"
#include "ditto/nn/model.hpp"
#include "ditto/train/trainer.hpp"

namespace ditto::presets {

struct EvalPlan {
    std::vector<int> nt_tests = {10, 20, 50, 100, 200};
    std::vector<double> gammas = {0.0, 0.1, 0.2, 0.3, 0.5, 1.0};
    std::vector<int> lf_sweep = {1, 5, 10, 20, 50, 100};
    int fine_steps = 200;   // finest reference resolution for super-resolution
    int noise_seeds = 5;
};

struct ExperimentRecipe {
    std::string name;
    PdeConfig pde;
    int count = 64;                      // trajectories to generate
    std::uint64_t data_seed = 7;
    std::array<double, 3> ratios = {0.8, 0.1, 0.1};
    nn::ModelConfig model;
    train::TrainingSchedule schedule;
    train::LossConfig loss;
    train::OptimizerConfig opt;
    EvalPlan eval;
};

const std::vector<std::string>& recipe_names();
ExperimentRecipe get_recipe(const std::string& name);

struct ConfigResult {
    ExperimentRecipe recipe;
    std::string data_path;
    std::string out_path;
    std::vector<std::string> errors;   // empty on success
    std::string normalized;            // full default echo (JSON text)
};

/// Parse + validate a config file. An empty file is the full default echo
/// for the default preset. All defaults are resolved into `normalized`.
ConfigResult validate_config(const std::filesystem::path& path);
ConfigResult validate_config_text(const std::string& text);

int config_schema_version();

}  // namespace ditto::presets
