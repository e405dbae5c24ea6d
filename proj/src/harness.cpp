#include "rdos/harness.hpp"

#include "rdos/parallel.hpp"
#include "rdos/random.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

namespace rdos {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config io

std::string_view to_string(AccessMode m) noexcept
{
    return m == AccessMode::White ? "white" : "black";
}

AccessMode access_from_string(std::string_view s)
{
    if (s == "white") {
        return AccessMode::White;
    }
    if (s == "black") {
        return AccessMode::Black;
    }
    throw std::invalid_argument("unknown access mode: " + std::string(s));
}

json number_or_inf(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return v;
}

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

    [[nodiscard]] std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* raw(const char* key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    void get(const char* key, T& out)
    {
        const json* v = raw(key);
        if (v == nullptr) {
            return;
        }
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
                if (!v->is_number_unsigned()) {
                    throw ConfigError(path(key) + ": expected a non-negative integer");
                }
            }
            out = v->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path(key) + ": wrong type");
        }
    }

    void get_double(const char* key, double& out)
    {
        const json* v = raw(key);
        if (v != nullptr) {
            out = as_double(*v, path(key));
        }
    }

    template <class E, class Parse>
    void get_enum(const char* key, E& out, Parse parse)
    {
        const json* v = raw(key);
        if (v == nullptr) {
            return;
        }
        if (!v->is_string()) {
            throw ConfigError(path(key) + ": expected a string");
        }
        try {
            out = parse(v->get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(path(key) + ": " + e.what());
        }
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) {
                throw ConfigError("unknown key: " + path(k.c_str()));
            }
        }
    }

    static double as_double(const json& v, const std::string& where)
    {
        if (v.is_number()) {
            return v.get<double>();
        }
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s == "inf") {
                return std::numeric_limits<double>::infinity();
            }
        }
        throw ConfigError(where + ": expected a number");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Stage1Config stage1_from(const json& j)
{
    Stage1Config c;
    Section s(j, "stage1");
    s.get("max_iters", c.max_iters);
    s.get("target_pool", c.target_pool);
    s.get("intervals", c.intervals);
    s.get_double("alpha", c.weights.alpha);
    s.get_double("beta", c.weights.beta);
    s.get_double("lambda", c.weights.lambda);
    s.get_enum("optimizer", c.optimizer, suffix_optimizer_from_string);
    s.get_enum("insertion", c.insertion, insertion_strategy_from_string);
    s.get("early_stop", c.early_stop);
    s.get("coevolve", c.coevolve);
    s.get("suffix_length", c.suffix_length);
    s.get("candidates", c.candidates_per_position);
    s.get("population", c.population);
    s.get("patience", c.patience);
    s.get_double("tolerance", c.tolerance);
    s.get_double("floor", c.floor);
    s.get_double("interval_threshold", c.interval_threshold);
    s.finish();
    return c;
}

json stage1_to(const Stage1Config& c)
{
    return {{"max_iters", c.max_iters},
            {"target_pool", c.target_pool},
            {"intervals", c.intervals},
            {"alpha", c.weights.alpha},
            {"beta", c.weights.beta},
            {"lambda", c.weights.lambda},
            {"optimizer", to_string(c.optimizer)},
            {"insertion", to_string(c.insertion)},
            {"early_stop", c.early_stop},
            {"coevolve", c.coevolve},
            {"suffix_length", c.suffix_length},
            {"candidates", c.candidates_per_position},
            {"population", c.population},
            {"patience", c.patience},
            {"tolerance", c.tolerance},
            {"floor", c.floor},
            {"interval_threshold", c.interval_threshold}};
}

Stage2Config stage2_from(const json& j)
{
    Stage2Config c;
    Section s(j, "stage2");
    s.get("iterations", c.iterations);
    s.get("population", c.population);
    s.get("seeds", c.seeds);
    s.get_enum("variant", c.variant, stage2_variant_from_string);
    s.get("elitism", c.elitism);
    s.get("tournament", c.tournament);
    s.get("patience", c.early_stop_patience);
    s.get_double("gain", c.early_stop_gain);
    s.get("early_stop", c.early_stop);
    if (const json* w = s.raw("weights")) {
        Section ws(*w, "stage2.weights");
        ws.get_double("rti", c.weights.w1);
        ws.get_double("fid", c.weights.w2);
        ws.get_double("stab", c.weights.w3);
        ws.finish();
    }
    s.finish();
    return c;
}

json stage2_to(const Stage2Config& c)
{
    return {{"iterations", c.iterations},
            {"population", c.population},
            {"seeds", c.seeds},
            {"variant", to_string(c.variant)},
            {"elitism", c.elitism},
            {"tournament", c.tournament},
            {"patience", c.early_stop_patience},
            {"gain", c.early_stop_gain},
            {"early_stop", c.early_stop},
            {"weights", {{"rti", c.weights.w1}, {"fid", c.weights.w2}, {"stab", c.weights.w3}}}};
}

std::vector<double> double_list(const json& j, const std::string& where)
{
    if (!j.is_array()) {
        throw ConfigError(where + ": expected a list");
    }
    std::vector<double> out;
    for (const auto& v : j) {
        out.push_back(Section::as_double(v, where));
    }
    return out;
}

json double_list_to(const std::vector<double>& v)
{
    json out = json::array();
    for (const auto x : v) {
        out.push_back(number_or_inf(x));
    }
    return out;
}

std::size_t line_of(std::string_view text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

std::string hex16(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

} // namespace

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); };
    if (agent.kind != "synthetic" && agent.kind != "remote") {
        fail("agent.kind", "must be synthetic or remote");
    }
    if (agent.kind == "remote" && agent.endpoint.empty()) {
        fail("agent.endpoint", "required for remote agents");
    }
    if (agent.access == AccessMode::Black && agent.k == 0) {
        fail("agent.k", "must be positive in black mode");
    }
    if (agent.profile != "reference") {
        try {
            (void)env_kind_from_string(agent.profile);
        } catch (const std::invalid_argument&) {
            fail("agent.profile", "must be reference, webshop, email or os");
        }
    }
    if (agent.susceptibility && !(*agent.susceptibility >= 0.0 && *agent.susceptibility <= 1.0)) {
        fail("agent.susceptibility", "must lie in [0,1]");
    }
    if (tasks == 0) {
        fail("tasks", "must be positive");
    }
    if (seeds.empty()) {
        fail("seeds", "must not be empty");
    }
    const auto nested = [&](const char* key, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            fail(key, e.what());
        }
    };
    if (stage1) {
        nested("stage1", [&] { stage1->validate(); });
    }
    if (stage2) {
        nested("stage2", [&] { stage2->validate(); });
    }
    nested("mutator", [&] { mutator.validate(); });
    if (defenses) {
        if (defenses->filter_theta && !(*defenses->filter_theta >= 0.0 && *defenses->filter_theta <= 1.0)) {
            fail("defenses.filter_theta", "must lie in [0,1]");
        }
        if (defenses->monitor_c && !(*defenses->monitor_c >= 0.0)) {
            fail("defenses.monitor_c", "must be non-negative");
        }
        if (defenses->monitor_c && defenses->calibration_episodes == 0) {
            fail("defenses.calibration_episodes", "must be positive");
        }
    }
    if (evaluation.episodes == 0) {
        fail("evaluation.episodes", "must be positive");
    }
    if (!(evaluation.level > 0.0 && evaluation.level < 1.0)) {
        fail("evaluation.level", "must lie in (0,1)");
    }
    if (evaluation.resamples == 0) {
        fail("evaluation.resamples", "must be positive");
    }
    if (sweep) {
        if (sweep->thetas.empty() && sweep->cs.empty()) {
            fail("sweep", "grids must not both be empty");
        }
        for (const auto t : sweep->thetas) {
            if (!(t >= 0.0 && t <= 1.0)) {
                fail("sweep.thetas", "values must lie in [0,1]");
            }
        }
        for (const auto c : sweep->cs) {
            if (!(c >= 0.0)) {
                fail("sweep.cs", "values must be non-negative");
            }
        }
        if (sweep->episodes == 0 || sweep->calibration_episodes == 0) {
            fail("sweep.episodes", "must be positive");
        }
    }
    if (pricing.input_per_million < 0 || pricing.output_per_million < 0) {
        fail("pricing", "prices must be non-negative");
    }
}

ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig c;
    Section root(j, "");
    root.get("name", c.name);
    root.get("seed", c.seed);
    if (const json* a = root.raw("agent")) {
        Section s(*a, "agent");
        s.get("kind", c.agent.kind);
        s.get("seed", c.agent.seed);
        s.get_enum("access", c.agent.access, access_from_string);
        s.get("k", c.agent.k);
        s.get("attention", c.agent.attention);
        s.get("profile", c.agent.profile);
        if (const json* v = s.raw("susceptibility"); v != nullptr && !v->is_null()) {
            c.agent.susceptibility = Section::as_double(*v, "agent.susceptibility");
        }
        s.get("endpoint", c.agent.endpoint);
        s.finish();
    }
    root.get_enum("environment", c.environment, env_kind_from_string);
    root.get_enum("surface", c.surface, surface_from_string);
    root.get("tasks", c.tasks);
    root.get("task_offset", c.task_offset);
    root.get("seeds", c.seeds);
    if (const json* v = root.raw("stage1")) {
        c.stage1 = v->is_null() ? std::nullopt : std::optional(stage1_from(*v));
    }
    if (const json* v = root.raw("stage2")) {
        c.stage2 = v->is_null() ? std::nullopt : std::optional(stage2_from(*v));
    }
    if (const json* v = root.raw("mutator")) {
        Section s(*v, "mutator");
        std::string kind = "rule-based";
        s.get("kind", kind);
        if (kind == "rule-based") {
            c.mutator.kind = MutatorInterface::Kind::RuleBased;
        } else if (kind == "external") {
            c.mutator.kind = MutatorInterface::Kind::External;
        } else {
            throw ConfigError("mutator.kind: must be rule-based or external");
        }
        s.get("endpoint", c.mutator.endpoint);
        s.finish();
    }
    if (const json* v = root.raw("defenses"); v != nullptr && !v->is_null()) {
        DefenseSpec d;
        Section s(*v, "defenses");
        if (const json* t = s.raw("filter_theta"); t != nullptr && !t->is_null()) {
            d.filter_theta = Section::as_double(*t, "defenses.filter_theta");
        }
        if (const json* t = s.raw("monitor_c"); t != nullptr && !t->is_null()) {
            d.monitor_c = Section::as_double(*t, "defenses.monitor_c");
        }
        s.get("calibration_episodes", d.calibration_episodes);
        if (const json* b = s.raw("budgets"); b != nullptr && !b->is_null()) {
            Budgets budgets;
            Section bs(*b, "defenses.budgets");
            if (const json* x = bs.raw("max_reasoning_tokens"); x != nullptr && !x->is_null()) {
                budgets.max_reasoning_tokens = x->get<std::size_t>();
            }
            if (const json* x = bs.raw("max_tool_calls"); x != nullptr && !x->is_null()) {
                budgets.max_tool_calls = x->get<std::size_t>();
            }
            if (const json* x = bs.raw("max_sim_time"); x != nullptr && !x->is_null()) {
                budgets.max_sim_time = Section::as_double(*x, "defenses.budgets.max_sim_time");
            }
            bs.finish();
            d.budgets = budgets;
        }
        s.finish();
        c.defenses = d;
    }
    if (const json* v = root.raw("evaluation")) {
        Section s(*v, "evaluation");
        s.get("episodes", c.evaluation.episodes);
        s.get("bootstrap", c.evaluation.bootstrap);
        s.get("resamples", c.evaluation.resamples);
        s.get_double("level", c.evaluation.level);
        s.get("exclude_failed_iterations", c.evaluation.exclude_failed_iterations);
        s.finish();
    }
    if (const json* v = root.raw("sweep"); v != nullptr && !v->is_null()) {
        SweepSpec sw;
        Section s(*v, "sweep");
        if (const json* t = s.raw("thetas")) {
            sw.thetas = double_list(*t, "sweep.thetas");
        }
        if (const json* t = s.raw("cs")) {
            sw.cs = double_list(*t, "sweep.cs");
        }
        s.get("calibration_episodes", sw.calibration_episodes);
        s.get("episodes", sw.episodes);
        s.finish();
        c.sweep = sw;
    }
    if (const json* v = root.raw("pricing")) {
        Section s(*v, "pricing");
        s.get("model", c.pricing.model);
        s.get_double("input_per_million", c.pricing.input_per_million);
        s.get_double("output_per_million", c.pricing.output_per_million);
        s.finish();
    }
    root.get("output", c.output);
    root.finish();
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c)
{
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["agent"] = {{"kind", c.agent.kind},
                  {"seed", c.agent.seed},
                  {"access", to_string(c.agent.access)},
                  {"k", c.agent.k},
                  {"attention", c.agent.attention},
                  {"profile", c.agent.profile},
                  {"susceptibility", c.agent.susceptibility ? json(*c.agent.susceptibility) : json(nullptr)},
                  {"endpoint", c.agent.endpoint}};
    j["environment"] = to_string(c.environment);
    j["surface"] = to_string(c.surface);
    j["tasks"] = c.tasks;
    j["task_offset"] = c.task_offset;
    j["seeds"] = c.seeds;
    j["stage1"] = c.stage1 ? stage1_to(*c.stage1) : json(nullptr);
    j["stage2"] = c.stage2 ? stage2_to(*c.stage2) : json(nullptr);
    j["mutator"] = {{"kind", c.mutator.kind == MutatorInterface::Kind::External ? "external" : "rule-based"},
                    {"endpoint", c.mutator.endpoint}};
    if (c.defenses) {
        const auto& d = *c.defenses;
        json b = nullptr;
        if (d.budgets) {
            b = {{"max_reasoning_tokens",
                  d.budgets->max_reasoning_tokens ? json(*d.budgets->max_reasoning_tokens) : json(nullptr)},
                 {"max_tool_calls", d.budgets->max_tool_calls ? json(*d.budgets->max_tool_calls) : json(nullptr)},
                 {"max_sim_time", d.budgets->max_sim_time ? json(*d.budgets->max_sim_time) : json(nullptr)}};
        }
        j["defenses"] = {{"filter_theta", d.filter_theta ? json(*d.filter_theta) : json(nullptr)},
                         {"monitor_c", d.monitor_c ? number_or_inf(*d.monitor_c) : json(nullptr)},
                         {"calibration_episodes", d.calibration_episodes},
                         {"budgets", b}};
    } else {
        j["defenses"] = nullptr;
    }
    j["evaluation"] = {{"episodes", c.evaluation.episodes},
                       {"bootstrap", c.evaluation.bootstrap},
                       {"resamples", c.evaluation.resamples},
                       {"level", c.evaluation.level},
                       {"exclude_failed_iterations", c.evaluation.exclude_failed_iterations}};
    if (c.sweep) {
        j["sweep"] = {{"thetas", double_list_to(c.sweep->thetas)},
                      {"cs", double_list_to(c.sweep->cs)},
                      {"calibration_episodes", c.sweep->calibration_episodes},
                      {"episodes", c.sweep->episodes}};
    } else {
        j["sweep"] = nullptr;
    }
    j["pricing"] = {{"model", c.pricing.model},
                    {"input_per_million", c.pricing.input_per_million},
                    {"output_per_million", c.pricing.output_per_million}};
    j["output"] = c.output;
    return j;
}

ExperimentConfig parse_config(std::string_view text)
{
    json j;
    try {
        j = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        const auto line = line_of(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ConfigError("parse error at line " + std::to_string(line) + ": " + e.what());
    }
    return config_from_json(j);
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config: " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string config_hash(const ExperimentConfig& c)
{
    // `output` is where results go, not what they are.
    auto j = config_to_json(c);
    j.erase("output");
    return hex16(fnv1a(j.dump()));
}

SyntheticAgent make_agent(const AgentSpec& spec, EnvKind kind)
{
    if (spec.kind == "remote") {
        const RemoteAgentAdapter adapter(spec.endpoint);
        (void)adapter.respond({}); // throws: no transport in this build
    }
    auto params = reference_params(spec.profile == "reference" ? kind : env_kind_from_string(spec.profile));
    if (spec.susceptibility) {
        params.susceptibility = *spec.susceptibility;
    }
    AgentAccess access = spec.access == AccessMode::White ? AgentAccess::white() : AgentAccess::black(spec.k);
    access.attention_available = spec.access == AccessMode::White && spec.attention;
    return SyntheticAgent(spec.seed, access, params);
}

// ---------------------------------------------------------------- records

EpisodeSummary summarize(const Trajectory& t)
{
    EpisodeSummary s;
    s.seed = t.seed;
    s.outcome = t.outcome;
    s.tau = t.encounter_turn;
    s.fetch = t.fetch_turn;
    s.turns = t.turns.size();
    for (const auto& turn : t.turns) {
        s.turn_tokens.push_back(turn.reasoning_tokens);
    }
    s.tokens = t.total_reasoning_tokens();
    s.delay = t.total_latency();
    s.target_in_response = t.target_in_response;
    s.valid_tool_invocation = t.valid_tool_invocation;
    s.gold_executed = t.gold_executed;
    s.defense_events = t.defense_events;
    return s;
}

namespace {

template <class T>
json opt(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j)
{
    return j.is_null() ? std::nullopt : std::optional<T>(j.get<T>());
}

json episode_to(const EpisodeSummary& e)
{
    json events = json::array();
    for (const auto& ev : e.defense_events) {
        events.push_back({ev.turn, ev.kind});
    }
    return {{"seed", e.seed},
            {"outcome", to_string(e.outcome)},
            {"tau", opt(e.tau)},
            {"fetch", opt(e.fetch)},
            {"T", e.turns},
            {"turn_tokens", e.turn_tokens},
            {"tokens", e.tokens},
            {"delay", e.delay},
            {"asr_s", e.target_in_response},
            {"asr_h", e.valid_tool_invocation},
            {"gold", e.gold_executed},
            {"defense", events}};
}

EpisodeSummary episode_from(const json& j)
{
    EpisodeSummary e;
    e.seed = j.at("seed").get<std::uint64_t>();
    e.outcome = outcome_from_string(j.at("outcome").get<std::string>());
    e.tau = opt_from<std::size_t>(j.at("tau"));
    e.fetch = opt_from<std::size_t>(j.at("fetch"));
    e.turns = j.at("T").get<std::size_t>();
    e.turn_tokens = j.at("turn_tokens").get<std::vector<std::size_t>>();
    e.tokens = j.at("tokens").get<std::size_t>();
    e.delay = j.at("delay").get<double>();
    e.target_in_response = j.at("asr_s").get<bool>();
    e.valid_tool_invocation = j.at("asr_h").get<bool>();
    e.gold_executed = j.at("gold").get<bool>();
    for (const auto& ev : j.at("defense")) {
        e.defense_events.push_back({ev.at(0).get<std::size_t>(), ev.at(1).get<std::string>()});
    }
    return e;
}

json episodes_to(const std::vector<EpisodeSummary>& v)
{
    json out = json::array();
    for (const auto& e : v) {
        out.push_back(episode_to(e));
    }
    return out;
}

std::vector<EpisodeSummary> episodes_from(const json& j)
{
    std::vector<EpisodeSummary> out;
    for (const auto& e : j) {
        out.push_back(episode_from(e));
    }
    return out;
}

json ledger_to(const LedgerSnapshot& l)
{
    return {{"n_api", l.n_api},
            {"input_tokens", l.input_tokens},
            {"output_tokens", l.output_tokens},
            {"n_roll", l.n_roll},
            {"optimizer_tokens", l.optimizer_tokens},
            {"rollout_tokens", l.rollout_tokens},
            {"h_gpu", l.h_gpu},
            {"cost", l.cost}};
}

LedgerSnapshot ledger_from(const json& j)
{
    LedgerSnapshot l;
    l.n_api = j.at("n_api").get<std::uint64_t>();
    l.input_tokens = j.at("input_tokens").get<std::uint64_t>();
    l.output_tokens = j.at("output_tokens").get<std::uint64_t>();
    l.n_roll = j.at("n_roll").get<std::uint64_t>();
    l.optimizer_tokens = j.at("optimizer_tokens").get<std::uint64_t>();
    l.rollout_tokens = j.at("rollout_tokens").get<std::uint64_t>();
    l.h_gpu = j.at("h_gpu").get<double>();
    l.cost = j.at("cost").get<double>();
    return l;
}

LedgerSnapshot snapshot(const CostLedger& l)
{
    LedgerSnapshot s;
    s.n_api = l.n_api();
    s.input_tokens = l.input_tokens();
    s.output_tokens = l.output_tokens();
    s.n_roll = l.n_roll;
    s.optimizer_tokens = l.optimizer_tokens;
    s.rollout_tokens = l.rollout_tokens;
    s.h_gpu = l.h_gpu;
    s.cost = api_cost(l);
    return s;
}

} // namespace

json to_json(const RunRecord& r)
{
    json j;
    j["schema_version"] = kRecordSchemaVersion;
    j["type"] = "run";
    j["run_id"] = r.run_id;
    j["config_hash"] = r.config_hash;
    j["task"] = r.task;
    j["seed"] = r.seed;
    if (r.stage1) {
        const auto& s = *r.stage1;
        json log = json::array();
        for (const auto& it : s.log) {
            log.push_back({it.iteration, it.objective, it.success});
        }
        j["stage1"] = {{"method", s.method},       {"success", s.success}, {"iterations", s.iterations},
                       {"max_iters", s.max_iters}, {"objective", s.objective}, {"suffix", s.suffix},
                       {"target", s.target},       {"log", log}};
    } else {
        j["stage1"] = nullptr;
    }
    if (r.stage2) {
        const auto& s = *r.stage2;
        json log = json::array();
        for (const auto& g : s.log) {
            log.push_back({g.generation, g.best_total, g.mean_total, g.best_id, g.best_s_rti, g.best_s_fid,
                           g.best_s_stab});
        }
        j["stage2"] = {{"variant", s.variant}, {"payload", s.payload},         {"policy", s.policy},
                       {"total", s.total},     {"s_rti", s.s_rti},             {"s_fid", s.s_fid},
                       {"s_stab", s.s_stab},   {"generations", s.generations}, {"log", log}};
    } else {
        j["stage2"] = nullptr;
    }
    j["trigger_episodes"] = episodes_to(r.trigger_episodes);
    j["payload_episodes"] = episodes_to(r.payload_episodes);
    j["benign_episodes"] = episodes_to(r.benign_episodes);
    j["ledger"] = ledger_to(r.ledger);
    return j;
}

RunRecord run_record_from_json(const json& j)
{
    if (j.at("schema_version").get<int>() != kRecordSchemaVersion) {
        throw std::runtime_error("unsupported record schema version");
    }
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.task = j.at("task").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (const auto& s = j.at("stage1"); !s.is_null()) {
        Stage1Summary x;
        x.method = s.at("method").get<std::string>();
        x.success = s.at("success").get<bool>();
        x.iterations = s.at("iterations").get<std::size_t>();
        x.max_iters = s.at("max_iters").get<std::size_t>();
        x.objective = s.at("objective").get<double>();
        x.suffix = s.at("suffix").get<std::string>();
        x.target = s.at("target").get<std::string>();
        for (const auto& it : s.at("log")) {
            x.log.push_back({it.at(0).get<std::size_t>(), it.at(1).get<double>(), it.at(2).get<bool>()});
        }
        r.stage1 = x;
    }
    if (const auto& s = j.at("stage2"); !s.is_null()) {
        Stage2Summary x;
        x.variant = s.at("variant").get<std::string>();
        x.payload = s.at("payload").get<std::string>();
        x.policy = s.at("policy").get<std::string>();
        x.total = s.at("total").get<double>();
        x.s_rti = s.at("s_rti").get<double>();
        x.s_fid = s.at("s_fid").get<int>();
        x.s_stab = s.at("s_stab").get<double>();
        x.generations = s.at("generations").get<std::size_t>();
        for (const auto& g : s.at("log")) {
            x.log.push_back({g.at(0).get<std::size_t>(), g.at(1).get<double>(), g.at(2).get<double>(),
                             g.at(3).get<std::uint64_t>(), g.at(4).get<double>(), g.at(5).get<int>(),
                             g.at(6).get<double>()});
        }
        r.stage2 = x;
    }
    r.trigger_episodes = episodes_from(j.at("trigger_episodes"));
    r.payload_episodes = episodes_from(j.at("payload_episodes"));
    r.benign_episodes = episodes_from(j.at("benign_episodes"));
    r.ledger = ledger_from(j.at("ledger"));
    return r;
}

namespace {

std::string point_id(const std::string& kind, double value)
{
    if (std::isinf(value)) {
        return kind + "=inf";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%g", kind.c_str(), value);
    return buf;
}

} // namespace

json to_json(const SweepRecord& r)
{
    const auto& p = r.point;
    return {{"schema_version", kRecordSchemaVersion},
            {"type", "sweep-point"},
            {"config_hash", r.config_hash},
            {"point_id", r.point_id},
            {"kind", p.kind},
            {"value", number_or_inf(p.value)},
            {"has_attack", p.has_attack},
            {"attack_asr_h", p.attack_asr_h},
            {"attack_hit", p.attack_hit},
            {"attack_e2e", p.attack_e2e},
            {"attack_rti", p.attack_rti},
            {"attack_delay", p.attack_delay},
            {"benign_accuracy", p.benign_accuracy},
            {"benign_completion", p.benign_completion},
            {"terminations", p.terminations},
            {"mu", p.mu},
            {"sigma", p.sigma}};
}

SweepRecord sweep_record_from_json(const json& j)
{
    SweepRecord r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.point_id = j.at("point_id").get<std::string>();
    auto& p = r.point;
    p.kind = j.at("kind").get<std::string>();
    p.value = Section::as_double(j.at("value"), "value");
    p.has_attack = j.at("has_attack").get<bool>();
    p.attack_asr_h = j.at("attack_asr_h").get<double>();
    p.attack_hit = j.at("attack_hit").get<double>();
    p.attack_e2e = j.at("attack_e2e").get<double>();
    p.attack_rti = j.at("attack_rti").get<double>();
    p.attack_delay = j.at("attack_delay").get<double>();
    p.benign_accuracy = j.at("benign_accuracy").get<double>();
    p.benign_completion = j.at("benign_completion").get<double>();
    p.terminations = j.at("terminations").get<std::size_t>();
    p.mu = j.at("mu").get<double>();
    p.sigma = j.at("sigma").get<double>();
    return r;
}

std::string record_line(const json& j)
{
    return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

// ---------------------------------------------------------------- metrics

namespace {

double rate(const std::vector<EpisodeSummary>& eps, bool EpisodeSummary::*flag)
{
    double n = 0;
    for (const auto& e : eps) {
        n += (e.*flag) ? 1.0 : 0.0;
    }
    return n / static_cast<double>(eps.size());
}

} // namespace

MetricsReport compute_report(const std::vector<RunRecord>& records, const ExperimentConfig& config)
{
    MetricsReport m;
    m.n = records.size();
    std::vector<EpisodeSummary> trigger;
    std::vector<EpisodeSummary> attacked;
    std::vector<EpisodeSummary> paired_benign;
    std::vector<EpisodeSummary> benign;
    std::vector<std::size_t> iters;
    std::vector<bool> success_flags;
    std::size_t max_iters = 0;
    for (const auto& r : records) {
        trigger.insert(trigger.end(), r.trigger_episodes.begin(), r.trigger_episodes.end());
        benign.insert(benign.end(), r.benign_episodes.begin(), r.benign_episodes.end());
        if (!r.payload_episodes.empty()) {
            if (r.payload_episodes.size() != r.benign_episodes.size()) {
                throw std::invalid_argument("compute_report: payload episodes lack benign baselines");
            }
            attacked.insert(attacked.end(), r.payload_episodes.begin(), r.payload_episodes.end());
            paired_benign.insert(paired_benign.end(), r.benign_episodes.begin(), r.benign_episodes.end());
        }
        if (r.stage1) {
            iters.push_back(r.stage1->iterations);
            success_flags.push_back(r.stage1->success);
            max_iters = std::max(max_iters, r.stage1->max_iters);
        }
    }
    if (!iters.empty()) {
        const auto flags = std::make_unique<bool[]>(success_flags.size());
        std::copy(success_flags.begin(), success_flags.end(), flags.get());
        m.iters = mean_iterations(iters, std::span<const bool>(flags.get(), success_flags.size()), max_iters,
                                  config.evaluation.exclude_failed_iterations);
    }
    if (!trigger.empty()) {
        m.asr_s = rate(trigger, &EpisodeSummary::target_in_response);
        m.asr_h = rate(trigger, &EpisodeSummary::valid_tool_invocation);
    } else {
        // No trigger stage: the trigger is taken as given.
        m.asr_s = 1.0;
        m.asr_h = 1.0;
    }

    std::vector<double> hit_samples;
    std::vector<double> acc_samples;
    const auto& outcome_set = !attacked.empty() ? attacked : (!trigger.empty() ? trigger : benign);
    if (!attacked.empty()) {
        std::uint64_t tok_a = 0;
        std::uint64_t tok_b = 0;
        for (std::size_t i = 0; i < attacked.size(); ++i) {
            tok_a += attacked[i].tokens;
            tok_b += paired_benign[i].tokens;
            hit_samples.push_back(attacked[i].tau ? 1.0 : 0.0);
        }
        m.rti = tok_b > 0 ? static_cast<double>(tok_a) / static_cast<double>(tok_b) : 1.0;
        m.hit = std::accumulate(hit_samples.begin(), hit_samples.end(), 0.0) / static_cast<double>(hit_samples.size());
    } else {
        m.rti = 1.0;
        m.hit = 0.0;
    }
    if (!outcome_set.empty()) {
        double delay = 0.0;
        for (const auto& e : outcome_set) {
            acc_samples.push_back(e.outcome == Outcome::Success ? 1.0 : 0.0);
            delay += e.delay;
        }
        m.accuracy =
            std::accumulate(acc_samples.begin(), acc_samples.end(), 0.0) / static_cast<double>(acc_samples.size());
        m.delay = delay / static_cast<double>(outcome_set.size());
    }
    m.e2e = e2e(m.asr_h, m.hit);

    if (config.evaluation.bootstrap) {
        const auto& ev = config.evaluation;
        if (!trigger.empty()) {
            std::vector<double> s;
            for (const auto& e : trigger) {
                s.push_back(e.valid_tool_invocation ? 1.0 : 0.0);
            }
            m.asr_h_ci = bootstrap_ci(s, ev.level, ev.resamples, hash_keys({config.seed, fnv1a("asr_h")}));
        }
        if (!hit_samples.empty()) {
            m.hit_ci = bootstrap_ci(hit_samples, ev.level, ev.resamples, hash_keys({config.seed, fnv1a("hit")}));
        }
        if (!acc_samples.empty()) {
            m.accuracy_ci =
                bootstrap_ci(acc_samples, ev.level, ev.resamples, hash_keys({config.seed, fnv1a("accuracy")}));
        }
    }
    m.validate();
    return m;
}

LedgerSnapshot total_ledger(const std::vector<RunRecord>& records, const Pricing& pricing)
{
    LedgerSnapshot t;
    for (const auto& r : records) {
        t.n_api += r.ledger.n_api;
        t.input_tokens += r.ledger.input_tokens;
        t.output_tokens += r.ledger.output_tokens;
        t.n_roll += r.ledger.n_roll;
        t.optimizer_tokens += r.ledger.optimizer_tokens;
        t.rollout_tokens += r.ledger.rollout_tokens;
        t.h_gpu += r.ledger.h_gpu;
    }
    CostLedger l;
    l.pricing = pricing;
    l.record(t.input_tokens, t.output_tokens);
    t.cost = api_cost(l);
    return t;
}

// ---------------------------------------------------------------- orchestration

namespace {

struct RunContext {
    const ExperimentConfig& config;
    const SyntheticAgent& agent;
    Pipeline pipeline;
    std::optional<DefenseConfig> defenses;
    std::string hash;
};

struct RunOutput {
    RunRecord record;
    TaskAttack attack;
};

std::string run_id(std::uint64_t task, std::uint64_t seed)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "t%04" PRIu64 "-s%" PRIu64, task, seed);
    return buf;
}

RunOutput execute_run(const RunContext& ctx, std::uint64_t task, std::uint64_t seed, std::size_t episodes)
{
    const auto& cfg = ctx.config;
    const auto& lex = ctx.agent.lexicon();
    const auto env = make_environment(cfg.environment, task, cfg.surface);
    const auto run_seed = hash_keys({cfg.seed, fnv1a("run"), task, seed});

    RunOutput out;
    auto& rec = out.record;
    rec.run_id = run_id(task, seed);
    rec.config_hash = ctx.hash;
    rec.task = task;
    rec.seed = seed;

    const bool use_stage1 = cfg.stage1 && ctx.pipeline != Pipeline::PayloadOnly;
    const bool use_stage2 = cfg.stage2 && ctx.pipeline != Pipeline::TriggerOnly;
    Injection injection{cfg.surface, {}};
    bool triggered = true;
    if (use_stage1) {
        const auto res = optimize_suffix(*cfg.stage1, ctx.agent, env, cfg.surface, base_target(lex), run_seed,
                                         cfg.mutator);
        Stage1Summary s;
        s.method = std::string(to_string(cfg.stage1->insertion));
        s.success = res.candidate.success;
        s.iterations = res.candidate.iterations;
        s.max_iters = cfg.stage1->max_iters;
        s.objective = res.candidate.objective;
        s.suffix = detokenize(res.candidate.suffix, lex.vocab);
        s.target = detokenize(res.candidate.target.tokens, lex.vocab);
        s.log = res.log;
        rec.stage1 = s;
        triggered = res.candidate.success;
        injection.suffix = res.candidate.suffix;
    }

    std::optional<Payload> payload;
    if (use_stage2 && triggered) {
        const auto res = run_stage2(*cfg.stage2, ctx.agent, env, cfg.surface, seed_payloads(cfg.stage2->variant, env, lex),
                                    run_seed, cfg.mutator);
        Stage2Summary s;
        s.variant = std::string(to_string(cfg.stage2->variant));
        s.payload = detokenize(res.best.local_sink, lex.vocab);
        s.policy = detokenize(res.best.persistent_policy, lex.vocab);
        s.total = res.best_score.total;
        s.s_rti = res.best_score.s_rti;
        s.s_fid = res.best_score.s_fid;
        s.s_stab = res.best_score.s_stab;
        s.generations = res.generations;
        s.log = res.log;
        rec.stage2 = s;
        auto ledger = res.ledger;
        ledger.pricing = cfg.pricing;
        rec.ledger = snapshot(ledger);
        payload = res.best;
    }

    for (std::size_t e = 0; e < episodes; ++e) {
        const auto es = hash_keys({run_seed, fnv1a("evaluation"), e});
        if (use_stage1) {
            rec.trigger_episodes.push_back(
                summarize(run_episode(ctx.agent, env, injection, payload, ctx.defenses, es)));
        }
        if (payload) {
            rec.payload_episodes.push_back(
                summarize(run_episode(ctx.agent, env, injection, payload, ctx.defenses, es, {true})));
        }
        rec.benign_episodes.push_back(
            summarize(run_episode(ctx.agent, env, std::nullopt, std::nullopt, ctx.defenses, es)));
    }
    out.attack = TaskAttack{env, injection, payload};
    return out;
}

std::optional<DefenseConfig> resolve_defenses(const ExperimentConfig& cfg, const SyntheticAgent& agent)
{
    if (!cfg.defenses) {
        return std::nullopt;
    }
    const auto& d = *cfg.defenses;
    DefenseConfig out;
    out.filter_theta = d.filter_theta;
    out.budgets = d.budgets;
    if (d.monitor_c) {
        std::vector<Trajectory> benign;
        for (std::size_t e = 0; e < d.calibration_episodes; ++e) {
            const auto task = cfg.task_offset + e % cfg.tasks;
            const auto env = make_environment(cfg.environment, task, cfg.surface);
            benign.push_back(run_episode(agent, env, std::nullopt, std::nullopt, std::nullopt,
                                         hash_keys({cfg.seed, fnv1a("calibration"), e})));
        }
        const auto calib = calibrate_monitor(benign);
        out.monitor = MonitorConfig{calib.mu, calib.sigma, *d.monitor_c};
    }
    out.validate();
    return out;
}

void ensure_dir(const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

json header_line(const ExperimentConfig& c, const std::string& hash)
{
    // Where the records live is not part of their payload.
    auto cfg = config_to_json(c);
    cfg.erase("output");
    return {{"schema_version", kRecordSchemaVersion}, {"type", "header"}, {"config_hash", hash}, {"config", cfg}};
}

// Appends records to records.jsonl strictly in run order as they finish,
// so an interrupted run leaves a valid prefix on disk.
class OrderedWriter {
public:
    OrderedWriter(std::optional<std::filesystem::path> path, std::size_t n) : ready_(n)
    {
        if (path) {
            out_.open(*path, std::ios::binary | std::ios::app);
            if (!out_) {
                throw std::runtime_error("cannot write " + path->string());
            }
        }
    }

    void put(std::size_t i, std::string line)
    {
        const std::lock_guard lock(mutex_);
        ready_[i] = std::move(line);
        while (next_ < ready_.size() && ready_[next_]) {
            if (out_.is_open()) {
                out_ << *ready_[next_] << '\n';
                out_.flush();
            }
            ready_[next_].reset();
            ++next_;
        }
    }

private:
    std::mutex mutex_;
    std::ofstream out_;
    std::vector<std::optional<std::string>> ready_;
    std::size_t next_ = 0;
};

ExperimentResult execute(const ExperimentConfig& config, const RunOptions& options, bool sweep)
{
    config.validate();
    if (options.pipeline == Pipeline::TriggerOnly && !config.stage1) {
        throw ConfigError("stage1: required to optimize a trigger");
    }
    if (options.pipeline == Pipeline::PayloadOnly && !config.stage2) {
        throw ConfigError("stage2: required to optimize a payload");
    }
    if (sweep && !config.sweep) {
        throw ConfigError("sweep: required for a defense sweep");
    }
    ExperimentResult result;
    result.config = config;
    result.config_hash = config_hash(config);
    const auto agent = make_agent(config.agent, config.environment);

    std::optional<std::filesystem::path> records_path;
    if (options.out_dir) {
        ensure_dir(*options.out_dir);
        write_text(*options.out_dir / "config.json", config_to_json(config).dump(2) + "\n");
        records_path = *options.out_dir / "records.jsonl";
        write_text(*records_path, record_line(header_line(config, result.config_hash)) + "\n");
    }

    RunContext ctx{config, agent, options.pipeline, sweep ? std::nullopt : resolve_defenses(config, agent),
                   result.config_hash};
    // A sweep fixes one attack per task from the first seed.
    const std::size_t per_task = sweep ? 1 : config.seeds.size();
    const std::size_t n = config.tasks * per_task;
    const std::size_t episodes = sweep ? config.sweep->episodes : config.evaluation.episodes;
    std::vector<RunOutput> outputs(n);
    {
        OrderedWriter writer(records_path, n);
        parallel_for(n, options.workers, [&](std::size_t i) {
            const auto task = config.task_offset + i / per_task;
            const auto seed = config.seeds[i % per_task];
            outputs[i] = execute_run(ctx, task, seed, episodes);
            writer.put(i, record_line(to_json(outputs[i].record)));
        });
    }
    for (auto& o : outputs) {
        result.records.push_back(std::move(o.record));
    }

    if (sweep) {
        std::vector<Environment> envs;
        std::vector<TaskAttack> attacks;
        for (const auto& o : outputs) {
            envs.push_back(o.attack.env);
            if (config.stage1 || config.stage2) {
                attacks.push_back(o.attack);
            }
        }
        SweepGrid grid{config.sweep->thetas, config.sweep->cs, config.sweep->calibration_episodes};
        const auto rep = defense_sweep(agent, envs, attacks, grid, config.sweep->episodes,
                                       hash_keys({config.seed, fnv1a("sweep")}), options.workers);
        std::ofstream out;
        if (records_path) {
            out.open(*records_path, std::ios::binary | std::ios::app);
        }
        for (const auto& p : rep.points) {
            SweepRecord r{result.config_hash, point_id(p.kind, p.value), p};
            if (out.is_open()) {
                out << record_line(to_json(r)) << '\n';
            }
            result.sweep.push_back(std::move(r));
        }
    }

    result.report = compute_report(result.records, config);
    result.ledger = total_ledger(result.records, config.pricing);
    if (options.out_dir) {
        if (std::any_of(result.records.begin(), result.records.end(), [](const RunRecord& r) { return r.stage1; })) {
            export_convergence(result.records, *options.out_dir / "convergence.csv");
        }
        RecordFile file{config, result.config_hash, result.records, result.sweep};
        write_text(*options.out_dir / "report.txt", report(file));
    }
    return result;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options)
{
    return execute(config, options, false);
}

ExperimentResult run_sweep(const ExperimentConfig& config, const RunOptions& options)
{
    return execute(config, options, true);
}

RecordFile read_records(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open records: " + path.string());
    }
    RecordFile file;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            if (j.at("schema_version").get<int>() != kRecordSchemaVersion) {
                throw std::runtime_error("unsupported schema version");
            }
            const auto type = j.at("type").get<std::string>();
            if (type == "header") {
                file.config = config_from_json(j.at("config"));
                file.config_hash = j.at("config_hash").get<std::string>();
            } else if (type == "run") {
                file.runs.push_back(run_record_from_json(j));
            } else if (type == "sweep-point") {
                file.sweep.push_back(sweep_record_from_json(j));
            } else {
                throw std::runtime_error("unknown record type " + type);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return file;
}

void write_records(const std::filesystem::path& path, const ExperimentResult& result)
{
    std::string text = record_line(header_line(result.config, result.config_hash)) + "\n";
    for (const auto& r : result.records) {
        text += record_line(to_json(r)) + "\n";
    }
    for (const auto& r : result.sweep) {
        text += record_line(to_json(r)) + "\n";
    }
    write_text(path, text);
}

// ---------------------------------------------------------------- exports

std::string convergence_csv(const std::vector<RunRecord>& records)
{
    struct Row {
        std::string method;
        std::uint64_t task;
        std::size_t iteration;
        std::uint64_t seed;
        double objective;
    };
    std::vector<Row> rows;
    for (const auto& r : records) {
        if (!r.stage1) {
            continue;
        }
        for (const auto& it : r.stage1->log) {
            rows.push_back({r.stage1->method, r.task, it.iteration, r.seed, it.objective});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.method, a.task, a.iteration, a.seed) < std::tie(b.method, b.task, b.iteration, b.seed);
    });
    std::string out = "method,task,iteration,objective\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%" PRIu64 ",%zu,%.17g\n", r.method.c_str(), r.task, r.iteration,
                      r.objective);
        out += buf;
    }
    return out;
}

void export_convergence(const std::vector<RunRecord>& records, const std::filesystem::path& path)
{
    write_text(path, convergence_csv(records));
}

namespace {

std::string pct(double r)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * r);
    return buf;
}

std::string num(double v, const char* fmt = "%.2f")
{
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string with_ci(double r, const std::optional<ConfidenceInterval>& ci)
{
    if (!ci) {
        return pct(r);
    }
    return pct(r) + " (" + num(100.0 * ci->low, "%.1f") + ", " + num(100.0 * ci->high, "%.1f") + ")";
}

std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows)
{
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& r : rows) {
            width[c] = std::max(width[c], r[c].size());
        }
    }
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            out += (c == 0 ? "" : "  ") + cells[c] + std::string(width[c] - cells[c].size(), ' ');
        }
        while (!out.empty() && out.back() == ' ') {
            out.pop_back();
        }
        out += '\n';
    };
    line(header);
    std::vector<std::string> rule;
    for (const auto w : width) {
        rule.emplace_back(w, '-');
    }
    line(rule);
    for (const auto& r : rows) {
        line(r);
    }
    return out;
}

} // namespace

std::string report(const RecordFile& file)
{
    const ExperimentConfig cfg = file.config.value_or(ExperimentConfig{});
    std::string out;
    out += "experiment " + cfg.name + "  config " + file.config_hash + "\n";
    out += "agent " + cfg.agent.kind + " seed " + std::to_string(cfg.agent.seed) + " (" +
           std::string(cfg.agent.access == AccessMode::White ? "white" : "black") + ")  environment " +
           std::string(to_string(cfg.environment)) + " / " + std::string(to_string(cfg.surface)) + "\n\n";

    if (!file.runs.empty()) {
        const auto m = compute_report(file.runs, cfg);
        const bool has_stage1 =
            std::any_of(file.runs.begin(), file.runs.end(), [](const RunRecord& r) { return r.stage1.has_value(); });
        const bool has_stage2 =
            std::any_of(file.runs.begin(), file.runs.end(), [](const RunRecord& r) { return r.stage2.has_value(); });
        if (has_stage1 && !has_stage2) {
            out += table({"runs", "ASR_S", "ASR_H", "Iters"},
                         {{std::to_string(m.n), pct(m.asr_s), with_ci(m.asr_h, m.asr_h_ci), num(m.iters, "%.1f")}});
        } else {
            std::vector<std::string> row{std::to_string(m.n)};
            std::vector<std::string> head{"runs"};
            if (has_stage1) {
                head.insert(head.end(), {"ASR_S", "ASR_H", "Iters"});
                row.insert(row.end(), {pct(m.asr_s), with_ci(m.asr_h, m.asr_h_ci), num(m.iters, "%.1f")});
            }
            head.insert(head.end(), {"Delay", "RTI", "Hit", "Acc", "E2E"});
            row.insert(row.end(), {num(m.delay, "%.1f"), num(m.rti) + "x", with_ci(m.hit, m.hit_ci),
                                   with_ci(m.accuracy, m.accuracy_ci), pct(m.e2e)});
            out += table(head, {row});
        }
        const auto l = total_ledger(file.runs, cfg.pricing);
        if (l.n_roll > 0) {
            out += "\ncost: N_api " + std::to_string(l.n_api) + "  N_roll " + std::to_string(l.n_roll) +
                   "  tokens in " + std::to_string(l.input_tokens) + " out " + std::to_string(l.output_tokens) +
                   "  C_api " + num(l.cost, "%.4f") + " (" + cfg.pricing.model + ")\n";
        }
    }

    if (!file.sweep.empty()) {
        out += "\ndefense sweep\n";
        std::vector<std::vector<std::string>> rows;
        for (const auto& s : file.sweep) {
            const auto& p = s.point;
            rows.push_back({s.point_id, p.has_attack ? pct(p.attack_e2e) : "-",
                            p.has_attack ? num(p.attack_rti) + "x" : "-",
                            p.has_attack ? num(p.attack_delay, "%.1f") : "-", pct(p.benign_accuracy),
                            pct(p.benign_completion), std::to_string(p.terminations)});
        }
        out += table({"point", "E2E", "RTI", "Delay", "Benign acc", "Completion", "Terminated"}, rows);
    }
    return out;
}

} // namespace rdos
