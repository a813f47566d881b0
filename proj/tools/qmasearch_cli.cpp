// qmasearch: command-line entry point. Every run writes one JSON report
// (stdout unless --out is given) and exits 0 when the command's contract
// holds, 2 when a verification failed and 1 on usage or input errors.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "qmasearch/cli.hpp"

namespace {

using qmasearch::cli::json;
using qmasearch::cli::Kind;
using qmasearch::cli::UsageError;

std::string flag_name(const std::string& param) {
  std::string f = "--";
  for (char c : param) f += c == '_' ? '-' : c;
  return f;
}

json convert(const qmasearch::cli::ParamDef& d, const std::string& text) {
  std::size_t used = 0;
  try {
    if (d.kind == Kind::Real) {
      const double v = std::stod(text, &used);
      if (used == text.size()) return v;
    } else if (d.kind == Kind::Int) {
      const long long v = std::stoll(text, &used);
      if (used == text.size()) return v;
    } else {
      return text;
    }
  } catch (const std::exception&) {
  }
  throw UsageError("cli: cannot read \"" + text + "\" as a value for " + flag_name(d.name));
}

struct SubcommandState {
  CLI::App* app = nullptr;
  std::string input, out, csv, audit;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::vector<qmasearch::cli::ParamDef> defs;
};

const std::map<std::string, std::string> kDescriptions = {
    {"ground-energy", "estimate the ground energy by bisection over LEDMV queries"},
    {"ledmv", "classify one LEDMV instance and answer it under the chosen policy"},
    {"marginals", "search for q-local marginals of a low-energy state"},
    {"gapped-marginals", "marginals search with the gapped-Hamiltonian schedule"},
    {"clock-verify", "check spectral properties of the clock Hamiltonian of a circuit"},
    {"witness-marginals", "search for marginals of a near-optimal witness"},
    {"covering-audit", "sample states and measure the covering radius of the net"},
    {"replay", "re-run the spec embedded in a report and compare results"},
};

int report_error(const std::string& what) {
  std::cerr << "qmasearch: error: " << what << "\n";
  return 1;
}

int validate_report_file(const std::string& path) {
  const auto text = qmasearch::io::read_file(path);
  const auto doc = qmasearch::io::parse_located(text, path);
  const auto errors = qmasearch::cli::validate_report(doc.value);
  for (const auto& e : errors) std::cerr << path << ": " << e << "\n";
  if (errors.empty()) std::cout << path << ": valid\n";
  return errors.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginals of low-energy states and near-optimal witnesses from exact LEDMV oracle queries"};
  app.require_subcommand(1);

  std::map<std::string, std::unique_ptr<SubcommandState>> subs;
  for (const auto& cmd : qmasearch::cli::commands()) {
    auto st = std::make_unique<SubcommandState>();
    st->app = app.add_subcommand(cmd, kDescriptions.at(cmd));
    st->defs = qmasearch::cli::param_defs(cmd);
    if (qmasearch::cli::takes_input(cmd)) st->app->add_option("--input", st->input, "input document")->required();
    st->seed_opt = st->app->add_option("--seed", st->seed, "64-bit seed");
    st->app->add_option("--out", st->out, "report path (default: stdout)");
    st->app->add_option("--csv", st->csv, "CSV projection of the result");
    st->app->add_option("--audit", st->audit, "line-delimited query audit log");
    for (const auto& d : st->defs) {
      if (d.kind == Kind::Flag) {
        st->app->add_flag(flag_name(d.name), st->flags[d.name], d.help);
      } else {
        st->app->add_option(flag_name(d.name), st->values[d.name], d.help + " (default " + d.fallback.dump() + ")");
      }
    }
    subs.emplace(cmd, std::move(st));
  }
  std::string to_validate;
  auto* validate = app.add_subcommand("validate-report", "check a report against the published schema");
  validate->add_option("--input", to_validate, "report path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) return validate_report_file(to_validate);
    for (auto& [cmd, st] : subs) {
      if (!st->app->parsed()) continue;
      qmasearch::cli::ExperimentSpec spec;
      spec.command = cmd;
      if (!st->input.empty()) spec.input = std::filesystem::absolute(st->input).lexically_normal().string();
      if (st->seed_opt->count() > 0) spec.seed = st->seed;
      spec.out = st->out;
      spec.csv = st->csv;
      spec.audit = st->audit;
      for (const auto& d : st->defs) {
        if (d.kind == Kind::Flag) {
          if (st->flags[d.name]) spec.params[d.name] = true;
        } else if (st->app->get_option(flag_name(d.name))->count() > 0) {
          spec.params[d.name] = convert(d, st->values[d.name]);
        }
      }
      const auto r = qmasearch::cli::run(spec);
      if (spec.out.empty()) std::cout << qmasearch::io::dump(r.report);
      return r.exit_code;
    }
  } catch (const std::exception& e) {
    return report_error(e.what());
  }
  return report_error("no command given");
}
