#pragma once

// Experiment configuration, orchestration, run records and reporting.
//
// Configs are JSON documents (comments allowed). Every key has a default, so
// a config naming only the agent and the environment is complete. The loaded
// config is re-serialized with defaults expanded; that canonical dump is what
// gets hashed and echoed next to the run records.

#include "rdos/defense.hpp"
#include "rdos/metrics.hpp"
#include "rdos/simenv.hpp"
#include "rdos/stage1.hpp"
#include "rdos/stage2.hpp"
#include "rdos/sweep.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rdos {

inline constexpr int kRecordSchemaVersion = 1;

struct AgentSpec {
    std::string kind = "synthetic"; // "synthetic" or "remote"
    std::uint64_t seed = 7;
    AccessMode access = AccessMode::White;
    std::size_t k = 20;
    bool attention = true;
    std::string profile = "reference"; // AgentParams preset; "reference" follows the environment kind
    std::optional<double> susceptibility;
    std::string endpoint; // remote only
};

struct DefenseSpec {
    std::optional<double> filter_theta;
    std::optional<double> monitor_c; // mu and sigma come from benign calibration episodes
    std::size_t calibration_episodes = 20;
    std::optional<Budgets> budgets;
};

struct EvaluationSpec {
    std::size_t episodes = 3; // per run, for each of the trigger, payload and benign sets
    bool bootstrap = false;
    std::size_t resamples = 1000;
    double level = 0.95;
    bool exclude_failed_iterations = false;
};

struct SweepSpec {
    std::vector<double> thetas{0.0, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> cs{std::numeric_limits<double>::infinity(), 3.0, 2.0, 1.5, 1.0};
    std::size_t calibration_episodes = 20;
    std::size_t episodes = 3;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::uint64_t seed = 0;
    AgentSpec agent;
    EnvKind environment = EnvKind::WebShop;
    Surface surface = Surface::Environment;
    std::size_t tasks = 50;
    std::size_t task_offset = 0;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::optional<Stage1Config> stage1 = Stage1Config{};
    std::optional<Stage2Config> stage2 = Stage2Config{};
    MutatorInterface mutator;
    std::optional<DefenseSpec> defenses;
    EvaluationSpec evaluation;
    std::optional<SweepSpec> sweep;
    Pricing pricing;
    std::string output = "runs";

    void validate() const;
};

/// Raised for malformed documents and invalid values; the message names the
/// line (parse errors) or the offending key (validation errors).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json config_to_json(const ExperimentConfig& c);
[[nodiscard]] ExperimentConfig parse_config(std::string_view text);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
/// FNV-1a of the canonical effective config, as 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& c);

[[nodiscard]] SyntheticAgent make_agent(const AgentSpec& spec, EnvKind kind);

struct EpisodeSummary {
    std::uint64_t seed = 0;
    Outcome outcome = Outcome::Success;
    std::optional<std::size_t> tau;
    std::optional<std::size_t> fetch;
    std::size_t turns = 0;
    std::vector<std::size_t> turn_tokens;
    std::size_t tokens = 0;
    double delay = 0.0;
    bool target_in_response = false;
    bool valid_tool_invocation = false;
    bool gold_executed = false;
    std::vector<DefenseEvent> defense_events;

    friend bool operator==(const EpisodeSummary&, const EpisodeSummary&) = default;
};

[[nodiscard]] EpisodeSummary summarize(const Trajectory& t);

struct Stage1Summary {
    std::string method; // insertion strategy
    bool success = false;
    std::size_t iterations = 0;
    std::size_t max_iters = 0;
    double objective = 0.0;
    std::string suffix;
    std::string target;
    std::vector<IterationRecord> log;
};

struct Stage2Summary {
    std::string variant;
    std::string payload;
    std::string policy;
    double total = 0.0;
    double s_rti = 0.0;
    int s_fid = 0;
    double s_stab = 0.0;
    std::size_t generations = 0;
    std::vector<GenerationRecord> log;
};

struct LedgerSnapshot {
    std::uint64_t n_api = 0;
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
    std::uint64_t n_roll = 0;
    std::uint64_t optimizer_tokens = 0;
    std::uint64_t rollout_tokens = 0;
    double h_gpu = 0.0;
    double cost = 0.0;
};

struct RunRecord {
    std::string run_id;
    std::string config_hash;
    std::uint64_t task = 0;
    std::uint64_t seed = 0;
    std::optional<Stage1Summary> stage1;
    std::optional<Stage2Summary> stage2;
    std::vector<EpisodeSummary> trigger_episodes; // suffix injected, ASR
    std::vector<EpisodeSummary> payload_episodes; // payload reached directly, Hit / RTI / Acc
    std::vector<EpisodeSummary> benign_episodes;  // same seeds as payload_episodes (or trigger_episodes)
    LedgerSnapshot ledger;
};

[[nodiscard]] nlohmann::json to_json(const RunRecord& r);
[[nodiscard]] RunRecord run_record_from_json(const nlohmann::json& j);

struct SweepRecord {
    std::string config_hash;
    std::string point_id;
    SweepPoint point;
};

[[nodiscard]] nlohmann::json to_json(const SweepRecord& r);
[[nodiscard]] SweepRecord sweep_record_from_json(const nlohmann::json& j);

enum class Pipeline { TriggerOnly, PayloadOnly, Full };

struct ExperimentResult {
    ExperimentConfig config;
    std::string config_hash;
    std::vector<RunRecord> records;
    std::vector<SweepRecord> sweep;
    MetricsReport report;
    LedgerSnapshot ledger;
};

struct RunOptions {
    Pipeline pipeline = Pipeline::Full;
    std::size_t workers = 1;
    /// When set, the effective config and records.jsonl are written here as
    /// runs complete (in run order).
    std::optional<std::filesystem::path> out_dir;
};

[[nodiscard]] ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Runs the pipeline once per task to fix an attack, then the defense grid.
[[nodiscard]] ExperimentResult run_sweep(const ExperimentConfig& config, const RunOptions& options = {});

/// Aggregates records into the metrics report. The same function serves
/// live runs and persisted records, so replay is exact.
[[nodiscard]] MetricsReport compute_report(const std::vector<RunRecord>& records, const ExperimentConfig& config);

[[nodiscard]] LedgerSnapshot total_ledger(const std::vector<RunRecord>& records, const Pricing& pricing);

struct RecordFile {
    std::optional<ExperimentConfig> config;
    std::string config_hash;
    std::vector<RunRecord> runs;
    std::vector<SweepRecord> sweep;
};

/// Reads a records.jsonl file: one header line, then run and sweep lines.
[[nodiscard]] RecordFile read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const ExperimentResult& result);

/// Canonical line for a record; byte-identical across reruns.
[[nodiscard]] std::string record_line(const nlohmann::json& j);

/// CSV with header "method,task,iteration,objective", sorted by (method, task, iteration).
[[nodiscard]] std::string convergence_csv(const std::vector<RunRecord>& records);
void export_convergence(const std::vector<RunRecord>& records, const std::filesystem::path& path);

/// Plain-text tables for a record file.
[[nodiscard]] std::string report(const RecordFile& file);

} // namespace rdos
