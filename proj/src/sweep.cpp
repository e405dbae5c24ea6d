#include "rdos/sweep.hpp"

#include "rdos/metrics.hpp"
#include "rdos/parallel.hpp"
#include "rdos/random.hpp"

#include <cmath>

namespace rdos {

namespace {

std::uint64_t episode_seed(std::uint64_t seed, std::string_view purpose, std::size_t task, std::size_t e)
{
    return hash_keys({seed, fnv1a(purpose), task, e});
}

} // namespace

SweepReport defense_sweep(const SyntheticAgent& agent, std::span<const Environment> envs,
                          std::span<const TaskAttack> attacks, const SweepGrid& grid, std::size_t episodes_per_task,
                          std::uint64_t seed, std::size_t workers)
{
    if (grid.thetas.empty() && grid.cs.empty()) {
        throw std::invalid_argument("defense_sweep: empty grid");
    }
    if (envs.empty() || episodes_per_task == 0) {
        throw std::invalid_argument("defense_sweep: need at least one task and episode");
    }

    CalibrationRecord calib;
    if (!grid.cs.empty()) {
        std::vector<Trajectory> benign;
        for (std::size_t t = 0; t < envs.size(); ++t) {
            for (std::size_t e = 0; e < grid.calibration_episodes; ++e) {
                benign.push_back(run_episode(agent, envs[t], std::nullopt, std::nullopt, std::nullopt,
                                             episode_seed(seed, "calibration", t, e)));
            }
        }
        calib = calibrate_monitor(benign);
    }

    std::vector<std::pair<std::string, double>> points;
    for (const auto th : grid.thetas) {
        points.emplace_back("filter", th);
    }
    for (const auto c : grid.cs) {
        points.emplace_back("monitor", c);
    }

    SweepReport report;
    report.points.resize(points.size());
    parallel_for(points.size(), workers, [&](std::size_t i) {
        const auto& [kind, value] = points[i];
        DefenseConfig d;
        if (kind == "filter") {
            d.filter_theta = value;
        } else {
            d.monitor = MonitorConfig{calib.mu, calib.sigma, value};
        }
        SweepPoint pt;
        pt.kind = kind;
        pt.value = value;
        pt.mu = calib.mu;
        pt.sigma = calib.sigma;

        std::size_t ok = 0;
        std::size_t completed = 0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < envs.size(); ++t) {
            for (std::size_t e = 0; e < episodes_per_task; ++e) {
                const auto traj =
                    run_episode(agent, envs[t], std::nullopt, std::nullopt, d, episode_seed(seed, "benign", t, e));
                ok += traj.outcome == Outcome::Success ? 1 : 0;
                completed += traj.outcome != Outcome::TerminatedByDefense ? 1 : 0;
                pt.terminations += traj.outcome == Outcome::TerminatedByDefense ? 1 : 0;
                ++n;
            }
        }
        pt.benign_accuracy = static_cast<double>(ok) / static_cast<double>(n);
        pt.benign_completion = static_cast<double>(completed) / static_cast<double>(n);

        if (!attacks.empty()) {
            std::vector<Trajectory> triggered;
            std::vector<Trajectory> reached;
            std::vector<Trajectory> baseline;
            for (std::size_t t = 0; t < attacks.size(); ++t) {
                const auto& a = attacks[t];
                for (std::size_t e = 0; e < episodes_per_task; ++e) {
                    const auto s = episode_seed(seed, "attack", t, e);
                    triggered.push_back(run_episode(agent, a.env, a.injection, a.payload, d, s));
                    reached.push_back(run_episode(agent, a.env, a.injection, a.payload, d, s, {true}));
                    baseline.push_back(run_episode(agent, a.env, std::nullopt, std::nullopt, std::nullopt, s));
                }
            }
            for (const auto& tr : triggered) {
                pt.terminations += tr.outcome == Outcome::TerminatedByDefense ? 1 : 0;
            }
            const auto asr = compute_asr(triggered);
            const auto slow = compute_slowdown(reached, baseline);
            pt.has_attack = true;
            pt.attack_asr_h = asr.asr_h;
            pt.attack_hit = slow.hit;
            pt.attack_e2e = e2e(asr.asr_h, slow.hit);
            pt.attack_rti = slow.rti;
            pt.attack_delay = slow.delay;
        }
        report.points[i] = pt;
    });
    return report;
}

} // namespace rdos
