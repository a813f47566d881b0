#pragma once

// Experiment specs, command dispatch and versioned JSON reports for the
// qmasearch executable.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qmasearch/clock.hpp"
#include "qmasearch/io.hpp"
#include "qmasearch/marginal_search.hpp"
#include "qmasearch/oracle.hpp"
#include "qmasearch/report_schema.hpp"
#include "qmasearch/witness_search.hpp"

namespace qmasearch::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

/// Bad flags, missing seeds, unknown keys.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Kind { Real, Int, Text, Flag };

struct ParamDef {
  std::string name;
  Kind kind;
  json fallback;
  std::string help;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"ground-energy", "ledmv",        "marginals",      "gapped-marginals",
                                          "clock-verify",  "witness-marginals", "covering-audit", "replay"};
  return c;
}

/// Whether the command reads an --input file.
inline bool takes_input(const std::string& cmd) { return cmd != "covering-audit"; }

inline std::vector<ParamDef> param_defs(const std::string& cmd) {
  const ParamDef tol{"tol", Kind::Real, 1e-6, "solver accuracy"};
  const ParamDef policy{"policy", Kind::Text, "always-no", "answers to invalid queries: always-yes|always-no|seeded-random"};
  const ParamDef mode{"mode", Kind::Text, "randomized", "candidate generation: randomized|derandomized"};
  const ParamDef q{"q", Kind::Int, 1, "marginal locality"};
  if (cmd == "ground-energy") return {{"delta", Kind::Real, 1e-3, "binary-search accuracy"}, policy, tol};
  if (cmd == "ledmv") return {policy, tol};
  if (cmd == "marginals") {
    return {q, {"a", Kind::Real, 0.1, "energy slack above lambda0"}, {"eps", Kind::Real, 0.2, "marginal accuracy"}, mode,
            policy, tol, {"budget", Kind::Int, 0, "proposal budget (0 = default)"}};
  }
  if (cmd == "gapped-marginals") {
    return {q, {"eps", Kind::Real, 0.3, "accuracy eps' against the ground-state marginals"}, mode, policy, tol};
  }
  if (cmd == "clock-verify") {
    return {{"eps_penalty", Kind::Real, 0.0, "output penalty (0 = Delta/1000)"}, {"c0", Kind::Real, 1.0, "interval constant"}};
  }
  if (cmd == "witness-marginals") {
    return {{"p1", Kind::Real, 2.0, "acceptance accuracy 1/p1"},
            {"p2", Kind::Real, 2.0, "marginal accuracy 1/p2"},
            q,
            {"c0", Kind::Real, 1.0, "interval constant"},
            {"scaled", Kind::Flag, false, "use user-sized M, eps_penalty, eps"},
            {"M", Kind::Int, 2, "pre-idling length (scaled mode)"},
            {"eps_penalty", Kind::Real, 0.0, "output penalty in scaled mode (0 = Delta/100)"},
            {"eps", Kind::Real, 0.0, "marginal search accuracy in scaled mode (0 = 1/(2 p2))"},
            mode,
            policy,
            tol};
  }
  if (cmd == "covering-audit") {
    return {q, {"eps", Kind::Real, 0.1, "covering radius (halved trace distance)"},
            {"samples", Kind::Int, 10000, "random test states"}};
  }
  if (cmd == "replay") return {};
  throw UsageError("cli: unknown command \"" + cmd + "\"");
}

struct ExperimentSpec {
  std::string command;
  std::string input;  // absolute path, empty when unused
  json params = json::object();
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string csv;
  std::string audit;

  /// Fills defaults, checks types and rejects unknown parameters.
  void resolve() {
    const auto defs = param_defs(command);
    json resolved = json::object();
    for (const auto& d : defs) {
      if (!params.contains(d.name)) {
        resolved[d.name] = d.fallback;
        continue;
      }
      const json& v = params[d.name];
      const bool ok = (d.kind == Kind::Real && v.is_number()) || (d.kind == Kind::Int && v.is_number_integer()) ||
                      (d.kind == Kind::Text && v.is_string()) || (d.kind == Kind::Flag && v.is_boolean());
      if (!ok) throw UsageError("cli: parameter \"" + d.name + "\" has the wrong type");
      resolved[d.name] = d.kind == Kind::Real ? json(v.get<double>()) : v;
    }
    for (const auto& [k, v] : params.items()) {
      if (!resolved.contains(k)) throw UsageError("cli: unknown parameter \"" + k + "\" for " + command);
    }
    params = std::move(resolved);
    if (takes_input(command) && input.empty()) throw UsageError("cli: " + command + " needs --input");
    if (!takes_input(command) && !input.empty()) throw UsageError("cli: " + command + " takes no --input");
    if (needs_seed() && !seed) throw UsageError("cli: " + command + " is randomized here and needs --seed");
    if (params.contains("policy")) parse_policy(params["policy"].get<std::string>());
    if (params.contains("mode")) parse_mode(params["mode"].get<std::string>());
  }

  bool needs_seed() const {
    if (command == "covering-audit") return true;
    if (params.contains("policy") && params["policy"] == "seeded-random") return true;
    if (params.contains("mode") && params["mode"] == "randomized") return true;
    return false;
  }

  json to_json() const {
    json j;
    j["command"] = command;
    j["input"] = input.empty() ? json(nullptr) : json(input);
    j["params"] = params;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["out"] = out.empty() ? json(nullptr) : json(out);
    j["csv"] = csv.empty() ? json(nullptr) : json(csv);
    j["audit"] = audit.empty() ? json(nullptr) : json(audit);
    return j;
  }

  static ExperimentSpec from_json(const json& j) {
    if (!j.is_object()) throw UsageError("cli: spec must be an object");
    for (const auto& [k, v] : j.items()) {
      if (k != "command" && k != "input" && k != "params" && k != "seed" && k != "out" && k != "csv" && k != "audit") {
        throw UsageError("cli: unknown spec key \"" + k + "\"");
      }
    }
    auto text = [&](const char* key) { return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : std::string(); };
    ExperimentSpec s;
    s.command = text("command");
    s.input = text("input");
    if (j.contains("params")) s.params = j["params"];
    if (j.contains("seed") && j["seed"].is_number_unsigned()) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("seed") && j["seed"].is_number_integer() && !j["seed"].is_number_unsigned()) {
      throw UsageError("cli: seed must be a non-negative integer");
    }
    s.out = text("out");
    s.csv = text("csv");
    s.audit = text("audit");
    s.resolve();
    return s;
  }
};

// ---------------------------------------------------------------------------
// JSON helpers

/// Non-finite values become null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json marginals_json(const std::map<QubitSet, DensityMatrix>& m) {
  json a = json::array();
  for (const auto& [s, rho] : m) a.push_back(io::to_json(rho));
  return a;
}

struct Check {
  std::string name;
  bool passed;
};

inline json checks_json(const std::vector<Check>& checks) {
  json a = json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"passed", c.passed}});
  return a;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// "path,value" lines for every scalar under `result`.
inline std::string csv_projection(const json& result) {
  std::ostringstream os;
  os << "path,value\n";
  auto rec = [&](auto&& self, const json& node, const std::string& path) -> void {
    if (node.is_object()) {
      for (const auto& [k, v] : node.items()) self(self, v, path + "/" + k);
    } else if (node.is_array()) {
      for (std::size_t i = 0; i < node.size(); ++i) self(self, node[i], path + "/" + std::to_string(i));
    } else {
      std::string v = node.dump();
      if (node.is_string()) v = node.get<std::string>();
      const bool quote = v.find_first_of(",\"\n") != std::string::npos;
      if (quote) {
        std::string q = "\"";
        for (char c : v) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        v = q + "\"";
      }
      os << path << "," << v << "\n";
    }
  };
  rec(rec, result, "");
  return os.str();
}

// ---------------------------------------------------------------------------
// Schema validation (the subset of JSON Schema the published schema uses:
// type, const, enum, required, properties, additionalProperties, items,
// minimum, maximum, allOf, if/then, $ref to #/$defs).

namespace detail {

inline bool has_type(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  return false;
}

inline void validate_node(const json& v, const json& s, const json& root, const std::string& path,
                          std::vector<std::string>& errors) {
  if (s.is_boolean()) {
    if (!s.get<bool>()) errors.push_back(path + ": not allowed");
    return;
  }
  if (s.contains("$ref")) {
    const std::string ref = s["$ref"].get<std::string>();
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) {
      errors.push_back(path + ": unsupported reference " + ref);
      return;
    }
    validate_node(v, root["$defs"][ref.substr(prefix.size())], root, path, errors);
  }
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
    } else {
      ok = has_type(v, s["type"].get<std::string>());
    }
    if (!ok) {
      errors.push_back(path + ": expected type " + s["type"].dump());
      return;
    }
  }
  if (s.contains("const") && v != s["const"]) errors.push_back(path + ": expected " + s["const"].dump());
  if (s.contains("enum")) {
    bool ok = false;
    for (const auto& e : s["enum"]) ok = ok || v == e;
    if (!ok) errors.push_back(path + ": value not in " + s["enum"].dump());
  }
  if (v.is_number()) {
    if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>()) errors.push_back(path + ": below minimum");
    if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>()) errors.push_back(path + ": above maximum");
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& r : s["required"])
        if (!v.contains(r.get<std::string>())) errors.push_back(path + ": missing " + r.get<std::string>());
    }
    for (const auto& [k, child] : v.items()) {
      if (s.contains("properties") && s["properties"].contains(k)) {
        validate_node(child, s["properties"][k], root, path + "/" + k, errors);
      } else if (s.contains("additionalProperties")) {
        validate_node(child, s["additionalProperties"], root, path + "/" + k, errors);
      }
    }
  }
  if (v.is_array() && s.contains("items")) {
    for (std::size_t i = 0; i < v.size(); ++i) validate_node(v[i], s["items"], root, path + "/" + std::to_string(i), errors);
  }
  if (s.contains("allOf")) {
    for (const auto& sub : s["allOf"]) validate_node(v, sub, root, path, errors);
  }
  if (s.contains("if")) {
    std::vector<std::string> probe;
    validate_node(v, s["if"], root, path, probe);
    if (probe.empty() && s.contains("then")) validate_node(v, s["then"], root, path, errors);
  }
}

}  // namespace detail

inline const json& report_schema() {
  static const json s = json::parse(kReportSchema);
  return s;
}

/// Violations of the published report schema; empty when the report conforms.
inline std::vector<std::string> validate_report(const json& report, const json& schema = report_schema()) {
  std::vector<std::string> errors;
  detail::validate_node(report, schema, schema, "", errors);
  return errors;
}

// ---------------------------------------------------------------------------
// Commands

struct CommandOutput {
  json result;
  std::vector<Check> checks;
};

struct Context {
  const ExperimentSpec& spec;
  std::ostream* audit = nullptr;

  double real(const char* k) const { return spec.params.at(k).get<double>(); }
  int integer(const char* k) const { return spec.params.at(k).get<int>(); }
  std::string text(const char* k) const { return spec.params.at(k).get<std::string>(); }
  bool flag(const char* k) const { return spec.params.at(k).get<bool>(); }
  std::uint64_t seed() const { return spec.seed.value_or(0); }

  ExactOracle oracle() const {
    ExactOracle o(parse_policy(text("policy")), seed(), real("tol"));
    o.set_audit_stream(audit);
    return o;
  }
};

inline json posthoc_json(const PosthocCheck& c) {
  return {{"lambda0", c.lambda0},
          {"energy_bound", c.energy_bound},
          {"value_lower", num(c.value_lower)},
          {"value_upper", num(c.value_upper)},
          {"witness_energy", c.witness_energy},
          {"witness_distance", c.witness_distance},
          {"passed", c.passed}};
}

inline json search_json(const MarginalReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"subset", s.subset}, {"a_l", s.a_l}, {"proposals", s.proposals}, {"queries", s.queries}});
  }
  return {{"lambda_hat", r.lambda_hat}, {"lambda_lo", r.lambda_lo},     {"lambda_hi", r.lambda_hi},
          {"delta", r.delta},           {"a_used", r.a_used},           {"queries_used", r.queries_used},
          {"steps_used", r.steps_used}, {"budget", r.budget},           {"steps", steps},
          {"warnings", r.warnings},     {"verification", posthoc_json(r.verification)}};
}

inline json failure_json(const SearchFailure& f) {
  return {{"step", f.step}, {"proposals", f.proposals}, {"queries", f.queries}, {"reason", f.reason}};
}

inline CommandOutput cmd_ground_energy(const Context& ctx) {
  const auto H = io::load_hamiltonian(ctx.spec.input);
  auto oracle = ctx.oracle();
  const double delta = ctx.real("delta");
  const auto g = estimate_ground_energy(H, delta, oracle);
  const double lambda0 = spectral_summary(H).lambda0;
  CommandOutput o;
  o.result = {{"n", H.n()},         {"m", H.m()},         {"lambda_hat", g.estimate}, {"lo", g.lo},
              {"hi", g.hi},         {"queries", g.queries}, {"lambda0_exact", lambda0},
              {"error", std::abs(g.estimate - lambda0)}, {"audit_records", oracle.queries()}};
  o.checks = {{"bracket_contains_lambda0", g.lo <= lambda0 + 1e-9 && lambda0 <= g.hi + 1e-9},
              {"estimate_within_delta", std::abs(g.estimate - lambda0) <= delta + 1e-9}};
  return o;
}

inline CommandOutput cmd_ledmv(const Context& ctx) {
  const auto inst = io::load_instance(ctx.spec.input);
  auto oracle = ctx.oracle();
  const auto ans = oracle.query(inst);
  const auto& c = oracle.last();
  CommandOutput o;
  o.result = {{"ground_truth", to_string(ans.ground_truth)},
              {"answer", to_string(ans.answer)},
              {"v_a", {{"lower", num(c.lower_a)}, {"upper", num(c.upper_a)}}},
              {"v_a_delta", {{"lower", num(c.lower_ad)}, {"upper", num(c.upper_ad)}}},
              {"audit_records", oracle.queries()}};
  o.checks = {{"answer_matches_promise", ans.ground_truth == Verdict::Invalid || ans.answer == ans.ground_truth}};
  return o;
}

inline SearchConfig search_config(const Context& ctx) {
  SearchConfig cfg;
  cfg.q = ctx.integer("q");
  cfg.eps = ctx.real("eps");
  cfg.mode = parse_mode(ctx.text("mode"));
  cfg.seed = ctx.seed();
  return cfg;
}

inline CommandOutput cmd_marginals(const Context& ctx) {
  const auto H = io::load_hamiltonian(ctx.spec.input);
  auto cfg = search_config(ctx);
  cfg.a = ctx.real("a");
  if (ctx.integer("budget") < 0) throw UsageError("cli: budget must be non-negative");
  cfg.max_steps_T = static_cast<std::uint64_t>(ctx.integer("budget"));
  auto oracle = ctx.oracle();
  const auto out = find_marginals(H, cfg, oracle);
  CommandOutput o;
  if (const auto* f = std::get_if<SearchFailure>(&out)) {
    o.result = {{"status", "failed"}, {"failure", failure_json(*f)}, {"audit_records", oracle.queries()}};
    o.checks = {{"search_completed", false}};
    return o;
  }
  const auto& r = std::get<MarginalReport>(out);
  o.result = {{"status", "completed"},
              {"marginals", marginals_json(r.marginals)},
              {"search", search_json(r)},
              {"audit_records", oracle.queries()}};
  o.checks = {{"search_completed", true}, {"posthoc_verification", r.verification.passed}};
  return o;
}

inline CommandOutput cmd_gapped(const Context& ctx) {
  const auto H = io::load_hamiltonian(ctx.spec.input);
  const double eps_prime = ctx.real("eps");
  const auto sched = gapped_schedule(H, eps_prime, search_config(ctx));
  auto oracle = ctx.oracle();
  const auto out = find_marginals(H, sched.cfg, oracle);
  CommandOutput o;
  const json spectrum = {{"lambda0", sched.spectrum.lambda0}, {"gap", sched.spectrum.gap}, {"ground_dim", sched.spectrum.ground_dim}};
  if (const auto* f = std::get_if<SearchFailure>(&out)) {
    o.result = {{"status", "failed"}, {"spectrum", spectrum}, {"failure", failure_json(*f)}, {"audit_records", oracle.queries()}};
    o.checks = {{"search_completed", false}};
    return o;
  }
  const auto& r = std::get<MarginalReport>(out);
  const auto exact = ground_state_marginals(H, sched.cfg.q);
  double worst = 0.0;
  for (const auto& [s, rho] : r.marginals) worst = std::max(worst, trace_norm_distance(rho, exact.at(s)));
  o.result = {{"status", "completed"},
              {"spectrum", spectrum},
              {"schedule", {{"a", sched.cfg.a}, {"eps", sched.cfg.eps}}},
              {"marginals", marginals_json(r.marginals)},
              {"max_distance_to_ground", worst},
              {"search", search_json(r)},
              {"audit_records", oracle.queries()}};
  o.checks = {{"search_completed", true}, {"within_eps_prime_of_ground", worst <= eps_prime}};
  return o;
}

inline CommandOutput cmd_clock_verify(const Context& ctx) {
  const auto c = io::load_circuit(ctx.spec.input);
  const auto h0 = build_clock(c, 0.0);
  const auto gap = spectral_gap_H0(h0);
  double eps = ctx.real("eps_penalty");
  if (eps == 0.0) eps = gap.legal_gap / 1000.0;
  const auto h = build_clock(c, eps);
  const auto acc = max_acceptance(c);

  // Energy of history states for the optimal witness and every basis witness.
  double eq3 = 0.0;
  const Eigen::Index dw = acc.M.rows();
  std::vector<Vector> witnesses{acc.optimal_witness.amplitudes()};
  for (Eigen::Index w = 0; w < dw; ++w) witnesses.push_back(Vector::Unit(dw, w));
  for (const auto& w : witnesses) {
    const Vector eta = history_vector(c, w);
    const double e = (eta.adjoint() * h.total.matrix() * eta)(0, 0).real();
    const double p = (w.adjoint() * acc.M * w)(0, 0).real();
    eq3 = std::max(eq3, std::abs(e - eps * (1.0 - p) / (c.T() + 1.0)));
  }
  const double basis = propagation_basis_residual(h0);
  const auto spcc = verify_spcc(h, ctx.real("c0"));
  const auto ov = check_history_overlap(h);
  json pairs = json::array();
  for (const auto& p : spcc.pairs) {
    pairs.push_back({{"eigenvalue", p.eigenvalue}, {"acceptance", p.acceptance}, {"center", p.center}, {"deviation", p.deviation}});
  }
  CommandOutput o;
  o.result = {{"num_qubits", c.num_qubits},
              {"T", c.T()},
              {"p_star", acc.p_star},
              {"eps_penalty", eps},
              {"gap", {{"legal", gap.legal_gap}, {"full", gap.full_gap}, {"bound", gap.bound}, {"null_dim", gap.null_dim}}},
              {"history_energy_residual", eq3},
              {"propagation_basis_residual", basis},
              {"spcc",
               {{"passed", spcc.passed},
                {"low_count", spcc.low_count},
                {"expected_count", spcc.expected_count},
                {"c0", spcc.c0},
                {"half_width", spcc.half_width},
                {"min_c0", num(spcc.min_c0)},
                {"pairs", pairs},
                {"diagnostic", spcc.diagnostic}}},
              {"overlap", {{"checked", ov.checked}, {"min_slack", num(ov.min_slack)}}}};
  o.checks = {{"gap_bound", gap.legal_gap >= gap.bound - 1e-9},
              {"null_space_dimension", gap.null_residual <= 1e-9},
              {"history_energy", eq3 <= 1e-9},
              {"propagation_basis", basis <= 1e-10},
              {"eigenvalue_intervals", spcc.passed},
              {"history_overlap", ov.checked == 0 || ov.min_slack >= -1e-9}};
  return o;
}

inline CommandOutput cmd_witness(const Context& ctx) {
  const auto c = io::load_circuit(ctx.spec.input);
  const int q = ctx.integer("q");
  const double c0 = ctx.real("c0");
  WitnessSearchParams params;
  if (ctx.flag("scaled")) {
    const int M = ctx.integer("M");
    double eps_penalty = ctx.real("eps_penalty");
    if (eps_penalty == 0.0) eps_penalty = spectral_gap_H0(build_clock(pre_idle(c, M), 0.0)).legal_gap / 100.0;
    double eps = ctx.real("eps");
    if (eps == 0.0) eps = 1.0 / (2.0 * ctx.real("p2"));
    params = scaled_params(c, M, eps_penalty, eps, ctx.real("p1"), q, c0);
  } else {
    params = derive_params(c, ctx.real("p1"), ctx.real("p2"), q, c0);
  }
  auto oracle = ctx.oracle();
  const auto out = find_witness_marginals(c, params, oracle, parse_mode(ctx.text("mode")), ctx.seed());
  const json pj = {{"mode", to_string(params.mode)}, {"p1", params.p1}, {"p2", params.p2}, {"q", params.q},
                   {"c0", params.c0}, {"T", params.T}, {"M", params.M}, {"T_tilde", params.T_tilde},
                   {"eps_penalty", params.eps_penalty}, {"a", params.a}, {"eps", params.eps}};
  CommandOutput o;
  if (const auto* f = std::get_if<WitnessFailure>(&out)) {
    o.result = {{"status", "failed"}, {"params", pj}, {"failure", failure_json(f->failure)}, {"audit_records", oracle.queries()}};
    o.checks = {{"search_completed", false}};
    return o;
  }
  const auto& r = std::get<WitnessReport>(out);
  const auto v = verify_report(c, r);
  o.result = {{"status", "completed"},
              {"params", pj},
              {"p_hat", r.p_hat},
              {"p_hat_raw", r.p_hat_raw},
              {"lambda_hat", r.lambda_hat},
              {"lambda0", r.lambda0},
              {"p_hat_exact", r.p_hat_exact},
              {"p_star", v.p_star},
              {"gap", r.gap},
              {"pre_idle_overlap", r.pre_idle_overlap},
              {"marginals", marginals_json(r.marginals)},
              {"search", search_json(r.search)},
              {"verification",
               {{"p_hat_error", v.p_hat_error},
                {"p_hat_exact_error", v.p_hat_exact_error},
                {"p_hat_exact_tol", v.bounds.p_hat_exact_tol},
                {"p_hat_tol", v.bounds.p_hat_search_tol},
                {"acceptance_threshold", v.acceptance_threshold},
                {"marginal_tolerance", v.marginal_tolerance},
                {"proof_acceptance", v.proof.proof_acceptance},
                {"proof_distance", num(v.proof.proof_distance)},
                {"ground_marginal_distance", v.ground_marginal_distance},
                {"acceptance_loss_bound", v.bounds.acceptance_loss},
                {"trace_bound", v.bounds.trace_bound},
                {"p_hat_margin", v.p_hat_margin},
                {"marginal_margin", num(v.marginal_margin)},
                {"passed", v.passed}}},
              {"audit_records", oracle.queries()}};
  o.checks = {{"search_completed", true},
              {"marginal_keys", v.keys_ok},
              {"p_hat_exact_window", v.p_hat_exact_ok},
              {"p_hat_window", v.p_hat_ok},
              {"accepted_proof_nearby", v.marginals_ok}};
  return o;
}

inline CommandOutput cmd_covering(const Context& ctx) {
  Rng rng(ctx.seed());
  const int samples = ctx.integer("samples");
  if (samples < 1) throw UsageError("cli: samples must be positive");
  const auto a = covering_audit(ctx.integer("q"), ctx.real("eps"), static_cast<std::size_t>(samples), rng);
  CommandOutput o;
  o.result = {{"net_size", a.net_size}, {"samples", a.samples}, {"worst_halved_distance", a.worst}, {"passed", a.passed}};
  o.checks = {{"covering_radius", a.passed}};
  return o;
}

struct RunResult {
  int exit_code = 0;
  json report;
};

inline RunResult run(const ExperimentSpec& spec, bool write_outputs = true, std::string timestamp = "");

/// Report with the timestamp removed, as canonical text.
inline std::string canonical_without_timestamp(json report) {
  report.erase("timestamp");
  return report.dump(2);
}

inline CommandOutput cmd_replay(const Context& ctx) {
  const auto text = io::read_file(ctx.spec.input);
  const auto doc = io::parse_located(text, ctx.spec.input);
  const json& original = doc.value;
  if (!original.is_object() || !original.contains("spec")) throw UsageError("cli: " + ctx.spec.input + " is not a report");
  if (original["spec"].value("command", "") == "replay") throw UsageError("cli: replaying a replay report is not supported");
  const auto spec = ExperimentSpec::from_json(original["spec"]);
  const auto again = run(spec, false, original.value("timestamp", ""));
  const std::string a = canonical_without_timestamp(original);
  const std::string b = canonical_without_timestamp(again.report);
  std::size_t line = 0;
  if (a != b) {
    std::size_t i = 0;
    while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
    line = static_cast<std::size_t>(std::count(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(i), '\n')) + 1;
  }
  CommandOutput o;
  o.result = {{"report", ctx.spec.input},
              {"replayed_command", spec.command},
              {"identical", a == b},
              {"first_difference_line", line}};
  o.checks = {{"byte_identical", a == b}};
  return o;
}

inline RunResult run(const ExperimentSpec& spec_in, bool write_outputs, std::string timestamp) {
  ExperimentSpec spec = spec_in;
  spec.resolve();
  std::ofstream audit_file;
  Context ctx{spec};
  if (write_outputs && !spec.audit.empty()) {
    audit_file.open(spec.audit, std::ios::trunc);
    if (!audit_file) throw UsageError("cli: cannot open audit log " + spec.audit);
    ctx.audit = &audit_file;
  }
  CommandOutput out;
  const auto& c = spec.command;
  if (c == "ground-energy") out = cmd_ground_energy(ctx);
  else if (c == "ledmv") out = cmd_ledmv(ctx);
  else if (c == "marginals") out = cmd_marginals(ctx);
  else if (c == "gapped-marginals") out = cmd_gapped(ctx);
  else if (c == "clock-verify") out = cmd_clock_verify(ctx);
  else if (c == "witness-marginals") out = cmd_witness(ctx);
  else if (c == "covering-audit") out = cmd_covering(ctx);
  else if (c == "replay") out = cmd_replay(ctx);
  else throw UsageError("cli: unknown command \"" + c + "\"");

  bool satisfied = true;
  for (const auto& ch : out.checks) satisfied = satisfied && ch.passed;
  RunResult r;
  r.report["schema_version"] = kSchemaVersion;
  r.report["command"] = c;
  r.report["timestamp"] = timestamp.empty() ? utc_timestamp() : timestamp;
  r.report["spec"] = spec.to_json();
  r.report["result"] = out.result;
  r.report["contract"] = {{"satisfied", satisfied}, {"checks", checks_json(out.checks)}};
  const auto errors = validate_report(r.report);
  if (!errors.empty()) throw Error("cli: internal error, report violates its schema: " + errors.front());
  r.exit_code = satisfied ? 0 : 2;
  if (write_outputs) {
    if (!spec.out.empty()) io::write_atomic(spec.out, io::dump(r.report));
    if (!spec.csv.empty()) io::write_atomic(spec.csv, csv_projection(r.report["result"]));
  }
  return r;
}

}  // namespace qmasearch::cli
