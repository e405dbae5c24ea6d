#pragma once

// Defense parameter sweeps over a fixed attack plan.

#include "rdos/defense.hpp"
#include "rdos/simenv.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdos {

/// One task's attack: the trigger suffix and the payload served at the attacker url.
struct TaskAttack {
    Environment env;
    Injection injection;
    std::optional<Payload> payload;
};

struct SweepGrid {
    std::vector<double> thetas;
    std::vector<double> cs;
    std::size_t calibration_episodes = 20;
};

struct SweepPoint {
    std::string kind; // "filter" or "monitor"
    double value = 0.0;
    bool has_attack = false;
    double attack_asr_h = 0.0;
    double attack_hit = 0.0;
    double attack_e2e = 0.0;
    double attack_rti = 1.0;
    double attack_delay = 0.0;
    double benign_accuracy = 0.0;
    double benign_completion = 0.0;
    std::size_t terminations = 0; // benign and attacked episodes ended by the defense
    double mu = 0.0;
    double sigma = 0.0;
};

struct SweepReport {
    std::vector<SweepPoint> points;
};

/// For each grid point runs attacked (when `attacks` is non-empty) and benign
/// episodes on `envs`. Monitor thresholds are calibrated on separate benign seeds.
[[nodiscard]] SweepReport defense_sweep(const SyntheticAgent& agent, std::span<const Environment> envs,
                                        std::span<const TaskAttack> attacks, const SweepGrid& grid,
                                        std::size_t episodes_per_task, std::uint64_t seed, std::size_t workers = 1);

} // namespace rdos
