#include "rdos/harness.hpp"
#include "rdos/metrics.hpp"
#include "rdos/stage1.hpp"
#include "rdos/stage2.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace rdos;

namespace {

Pipeline pipeline_from(const std::string& s)
{
    if (s == "full") {
        return Pipeline::Full;
    }
    if (s == "trigger") {
        return Pipeline::TriggerOnly;
    }
    if (s == "payload") {
        return Pipeline::PayloadOnly;
    }
    throw std::invalid_argument("pipeline must be full, trigger or payload");
}

nlohmann::json report_json(const MetricsReport& m)
{
    auto ci = [](const std::optional<ConfidenceInterval>& c) {
        return c ? nlohmann::json{{"point", c->point}, {"low", c->low}, {"high", c->high}} : nlohmann::json(nullptr);
    };
    return {{"asr_s", m.asr_s},       {"asr_h", m.asr_h},   {"hit", m.hit},   {"accuracy", m.accuracy},
            {"rti", m.rti},           {"delay", m.delay},   {"iters", m.iters}, {"e2e", m.e2e},
            {"n", m.n},               {"asr_h_ci", ci(m.asr_h_ci)}, {"hit_ci", ci(m.hit_ci)},
            {"accuracy_ci", ci(m.accuracy_ci)}};
}

// Results cross the boundary as JSON text; the Python side decodes it.
std::string result_json(const ExperimentResult& r)
{
    nlohmann::json j;
    j["config_hash"] = r.config_hash;
    j["report"] = report_json(r.report);
    j["records"] = nlohmann::json::array();
    for (const auto& rec : r.records) {
        j["records"].push_back(to_json(rec));
    }
    j["sweep"] = nlohmann::json::array();
    for (const auto& s : r.sweep) {
        j["sweep"].push_back(to_json(s));
    }
    return j.dump();
}

std::string run(const std::string& config_text, const std::string& pipeline, std::size_t workers,
                std::optional<std::string> out_dir, bool sweep)
{
    const auto cfg = parse_config(config_text);
    RunOptions opts;
    opts.pipeline = pipeline_from(pipeline);
    opts.workers = workers;
    if (out_dir) {
        opts.out_dir = *out_dir;
    }
    py::gil_scoped_release release;
    return result_json(sweep ? run_sweep(cfg, opts) : run_experiment(cfg, opts));
}

} // namespace

PYBIND11_MODULE(_rdos, m)
{
    m.doc() = "Native core of the rdos red-teaming harness";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("insertion_score", &insertion_score, py::arg("match"), py::arg("continuation"), py::arg("attention"),
          py::arg("weights"), py::arg("target_len"));
    py::class_<InsertionWeights>(m, "InsertionWeights")
        .def(py::init([](double a, double b, double l) { return InsertionWeights{a, b, l}; }), py::arg("alpha") = 1.0,
             py::arg("beta") = 1.0, py::arg("lambda_") = 1.0)
        .def_readwrite("alpha", &InsertionWeights::alpha)
        .def_readwrite("beta", &InsertionWeights::beta)
        .def_readwrite("lambda_", &InsertionWeights::lambda);

    m.def(
        "select_intervals",
        [](const std::vector<std::tuple<std::size_t, std::size_t, double>>& iv, std::size_t limit) {
            std::vector<Interval> in;
            for (const auto& [s, e, w] : iv) {
                in.push_back({s, e, w});
            }
            std::vector<std::tuple<std::size_t, std::size_t, double>> out;
            for (const auto& i : select_intervals(in, limit)) {
                out.emplace_back(i.start, i.end, i.score);
            }
            return out;
        },
        py::arg("intervals"), py::arg("limit"), "Max-weight disjoint subset of at most `limit` (start, end, score).");

    m.def("s_stab", [](const std::vector<double>& v) { return s_stab(v); });
    m.def(
        "payload_score",
        [](std::vector<double> rti, const std::vector<int>& fid, double w1, double w2, double w3) {
            const auto s = combine_score(std::move(rti), fid, {w1, w2, w3});
            return py::dict(py::arg("s_rti") = s.s_rti, py::arg("s_fid") = s.s_fid, py::arg("s_stab") = s.s_stab,
                            py::arg("total") = s.total);
        },
        py::arg("per_seed_rti"), py::arg("per_seed_fid"), py::arg("w1") = 1.0, py::arg("w2") = 1.0,
        py::arg("w3") = 1.0);

    m.def("e2e", &e2e, py::arg("asr_h"), py::arg("hit"));
    m.def("rollout_count", &rollout_count, py::arg("t2"), py::arg("population"), py::arg("seeds"));
    m.def(
        "api_cost",
        [](const std::vector<std::pair<std::uint64_t, std::uint64_t>>& calls, double c_in, double c_out) {
            CostLedger l;
            l.pricing.input_per_million = c_in;
            l.pricing.output_per_million = c_out;
            for (const auto& [i, o] : calls) {
                l.record(i, o);
            }
            return api_cost(l);
        },
        py::arg("calls"), py::arg("input_per_million") = 0.50, py::arg("output_per_million") = 1.50);
    m.def(
        "bootstrap_ci",
        [](const std::vector<double>& samples, double level, std::size_t resamples, std::uint64_t seed) {
            const auto c = bootstrap_ci(samples, level, resamples, seed);
            return py::make_tuple(c.point, c.low, c.high);
        },
        py::arg("samples"), py::arg("level") = 0.95, py::arg("resamples") = 1000, py::arg("seed") = 0);

    m.def(
        "effective_config", [](const std::string& text) { return config_to_json(parse_config(text)).dump(); },
        py::arg("text"));
    m.def(
        "config_hash", [](const std::string& text) { return config_hash(parse_config(text)); }, py::arg("text"));

    m.def(
        "run_experiment",
        [](const std::string& text, const std::string& pipeline, std::size_t workers, std::optional<std::string> out) {
            return run(text, pipeline, workers, std::move(out), false);
        },
        py::arg("config"), py::arg("pipeline") = "full", py::arg("workers") = 1, py::arg("out_dir") = py::none());
    m.def(
        "run_sweep",
        [](const std::string& text, std::size_t workers, std::optional<std::string> out) {
            return run(text, "full", workers, std::move(out), true);
        },
        py::arg("config"), py::arg("workers") = 1, py::arg("out_dir") = py::none());

    m.def(
        "report", [](const std::string& path) { return report(read_records(path)); }, py::arg("records_path"));
    m.def(
        "convergence_csv",
        [](const std::vector<std::string>& paths) {
            std::vector<RunRecord> all;
            for (const auto& p : paths) {
                auto f = read_records(p);
                all.insert(all.end(), f.runs.begin(), f.runs.end());
            }
            return convergence_csv(all);
        },
        py::arg("records_paths"));
}
