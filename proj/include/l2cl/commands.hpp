#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "l2cl/config.hpp"
#include "l2cl/data.hpp"
#include "l2cl/synth.hpp"

namespace l2cl {

inline constexpr const char* kArtifactVersion = "l2cl 0.1.0";

// Config keys overridable from the command line.
struct Overrides {
    std::optional<uint64_t> seed;  // sets both seed_init and seed_sample
    std::optional<int> workers;
    std::optional<int> precision;
};

struct PrepareArgs {
    std::string input;
    std::string out_dir;
    ColumnSpec columns;
    std::optional<double> theta;  // implicit-feedback threshold, applied when ratings exist
    int k_user = 0;               // 0 disables k-core filtering on that side
    int k_item = 0;
    std::array<double, 3> ratios = {0.8, 0.1, 0.1};
    uint64_t seed = 42;
};

struct TrainArgs {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    std::string operator_cache;  // optional path; load if present, else build and save
    Overrides overrides;
};

struct EvalArgs {
    std::string config_path;
    std::string data_dir;
    std::string checkpoint;
    std::string out_dir;
    std::string phase = "test";  // "val" or "test"
    bool sparsity_groups = false;
    Overrides overrides;
};

struct GridArgs {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    Overrides overrides;
};

struct SweepArgs {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    std::string parameter;        // tau | alpha | lambda1
    std::vector<double> values;   // empty: parameter's default grid
    Overrides overrides;
};

struct BenchArgs {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    std::vector<std::string> schemes;  // default {u0_i1, lightgcn}
    int repetitions = 10;
    int warmup = 1;
    bool full_training = false;
    Overrides overrides;
};

struct ExportArgs {
    std::string config_path;
    std::string data_dir;  // needed for readout export
    std::string checkpoint;
    std::string out_file;
    std::string format = "text";  // text | binary
    std::string what = "readout";  // readout | layer0
    int64_t sample_users = 0;      // 0: full table
    uint64_t sample_seed = 42;
    Overrides overrides;
};

struct SynthArgs {
    std::string out_file;
    SynthParams params;
};

int cmd_prepare(const PrepareArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_grid(const GridArgs& args);
int cmd_sweep(const SweepArgs& args);
int cmd_bench(const BenchArgs& args);
int cmd_export(const ExportArgs& args);
int cmd_synth(const SynthArgs& args);

// Split-directory access shared by commands and tests.
struct PreparedData {
    SplitDataset split;
    uint64_t fingerprint = 0;
};
PreparedData load_prepared(const std::string& data_dir);

}  // namespace l2cl
