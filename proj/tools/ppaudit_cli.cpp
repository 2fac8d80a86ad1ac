// Copyright 2026 The ppaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ppaudit: sample-size planner, Monte Carlo simulator, platform service,
// auditor client and figure-data generator.
//
// Exit codes: 0 success (audit: fair), 2 audit found EFG > alpha, 1 error.

#include <signal.h>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "ppaudit/config.hpp"
#include "ppaudit/ppaudit.hpp"

namespace {

constexpr uint64_t kDefaultSeed = 20230131;
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnfair = 2;

struct Globals {
  std::optional<uint64_t> seed;
  std::string output;
};

// --seed, then $PPAUDIT_SEED, then the built-in default.
uint64_t ResolveSeed(const Globals& g, std::optional<uint64_t> from_config = std::nullopt) {
  if (g.seed) return *g.seed;
  if (from_config) return *from_config;
  if (const char* env = std::getenv("PPAUDIT_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      std::cerr << "warning: ignoring unparseable PPAUDIT_SEED='" << env << "'\n";
    }
  }
  return kDefaultSeed;
}

int Fail(const absl::Status& status) {
  std::cerr << "error: " << status.message() << "\n";
  return kExitError;
}

// Writes `text` to --output, or stdout when unset.
bool Emit(const Globals& g, const std::string& text) {
  if (g.output.empty()) {
    std::cout << text;
    return true;
  }
  std::ofstream out(g.output, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << g.output << "\n";
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

struct PlanFlags {
  double alpha = 0.2;
  double delta = 0.05;
  double epsilon = 1.0;
  int64_t groups = 2;
  int64_t bins = 100;
  bool no_privacy = false;
};

int RunPlan(const Globals& g, const PlanFlags& f) {
  std::cerr << "# plan alpha=" << ppaudit::FormatDouble(f.alpha)
            << " delta=" << ppaudit::FormatDouble(f.delta)
            << " epsilon=" << ppaudit::FormatDouble(f.epsilon) << " groups=" << f.groups
            << " bins=" << f.bins << " private=" << (f.no_privacy ? "false" : "true") << "\n";
  ppaudit::PlanRequest request{f.alpha, f.delta, f.epsilon, f.groups, f.bins, !f.no_privacy};
  auto plan = ppaudit::Plan(request);
  if (!plan.ok()) return Fail(plan.status());
  std::ostringstream out;
  out << "n_min=" << plan->n_min_per_group << "\n"
      << "raw_bound=" << ppaudit::FormatDouble(plan->raw_bound) << "\n";
  if (!f.no_privacy) {
    out << "factor=" << ppaudit::FormatDouble(plan->factor_vs_nonprivate) << "\n"
        << "sdp_factor=" << ppaudit::FormatDouble(plan->sdp_factor) << "\n";
  }
  out << "upper_bound=" << ppaudit::FormatDouble(plan->upper_bound_factor) << "\n";
  return Emit(g, out.str()) ? kExitOk : kExitError;
}

// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::string config;
  std::optional<int64_t> trials;
  unsigned threads = 0;
};

int RunSimulate(const Globals& g, const SimulateFlags& f) {
  auto loaded = ppaudit::config::LoadExperimentConfig(f.config);
  if (!loaded.ok()) return Fail(loaded.status());
  ppaudit::ExperimentSpec& spec = loaded->spec;
  spec.seed = ResolveSeed(g, loaded->seed_from_file ? std::optional(spec.seed) : std::nullopt);
  if (f.trials) spec.trials = *f.trials;
  if (f.threads != 0) spec.threads = f.threads;
  if (auto status = spec.Validate(); !status.ok()) return Fail(status);

  std::cerr << "# simulate name=" << spec.name << " seed=" << spec.seed
            << " trials=" << spec.trials << " n_per_group=" << spec.n_per_group
            << (loaded->n_from_planner ? " (planner)" : "")
            << " use_privacy=" << (spec.use_privacy ? "true" : "false")
            << " alpha=" << ppaudit::FormatDouble(spec.audit.alpha)
            << " delta=" << ppaudit::FormatDouble(spec.audit.delta)
            << " epsilon=" << ppaudit::FormatDouble(spec.audit.epsilon)
            << " groups=" << spec.audit.attributes.size() << " bins=" << spec.audit.domain.size()
            << " bias=" << ppaudit::BiasKindName(spec.estimator.bias.kind) << "\n";

  std::ostringstream csv;
  if (loaded->sweep) {
    auto rows = ppaudit::TradeoffCurve(loaded->sweep->axis, loaded->sweep->values, spec);
    if (!rows.ok()) return Fail(rows.status());
    ppaudit::WriteTradeoffCsv(csv, *rows);
    for (const auto& row : *rows) {
      std::cerr << "# " << ppaudit::TradeoffAxisName(row.axis) << "="
                << ppaudit::FormatDouble(row.value) << " n=" << row.n_per_group
                << " failure_rate=" << ppaudit::FormatDouble(row.failure_rate)
                << " mean_efg=" << ppaudit::FormatDouble(row.mean_efg) << "\n";
    }
    return Emit(g, csv.str()) ? kExitOk : kExitError;
  }

  auto result = ppaudit::RunExperiment(spec);
  if (!result.ok()) return Fail(result.status());
  ppaudit::WriteExperimentCsv(csv, {*result});
  for (const auto& w : result->warnings) std::cerr << "warning: " << w << "\n";
  if (result->failure_rate) {
    std::cerr << "# fair estimator: failure_rate=" << ppaudit::FormatDouble(*result->failure_rate)
              << (*result->failure_rate <= spec.audit.delta ? " <= " : " > ")
              << "delta=" << ppaudit::FormatDouble(spec.audit.delta) << "\n";
  } else {
    std::cerr << "# biased estimator (true gap " << ppaudit::FormatDouble(result->true_gap)
              << "): power=" << ppaudit::FormatDouble(*result->power) << "\n";
  }
  std::cerr << "# efg mean=" << ppaudit::FormatDouble(result->efg.mean)
            << " p50=" << ppaudit::FormatDouble(result->efg.p50)
            << " p95=" << ppaudit::FormatDouble(result->efg.p95)
            << " wall_clock=" << result->wall_clock.count() << "s\n";
  return Emit(g, csv.str()) ? kExitOk : kExitError;
}

// ---------------------------------------------------------------------------

struct FigureFlags {
  std::string sweep;
  double alpha = 0.2;
  double delta = 0.05;
  int64_t groups = 2;
  int64_t bins = 100;
};

int RunFigure(const Globals& g, const FigureFlags& f) {
  auto parameter = ppaudit::ParseSweepParameter(f.sweep);
  if (!parameter.ok()) return Fail(parameter.status());
  std::cerr << "# figure sweep=" << f.sweep << " fixed alpha=" << ppaudit::FormatDouble(f.alpha)
            << " delta=" << ppaudit::FormatDouble(f.delta) << " groups=" << f.groups
            << " bins=" << f.bins << "\n";
  ppaudit::PlanRequest fixed{f.alpha, f.delta, 1.0, f.groups, f.bins, true};
  auto rows = ppaudit::FactorSweep(*parameter, ppaudit::DefaultSweepGrid(*parameter), fixed);
  if (!rows.ok()) return Fail(rows.status());
  std::ostringstream csv;
  ppaudit::WriteSweepCsv(csv, *rows);
  return Emit(g, csv.str()) ? kExitOk : kExitError;
}

// ---------------------------------------------------------------------------

struct ServeFlags {
  std::string config;
  std::string listen;
};

int RunServe(const Globals& g, const ServeFlags& f) {
  auto config = ppaudit::config::LoadServerConfig(f.config);
  if (!config.ok()) return Fail(config.status());
  if (!f.listen.empty()) {
    auto endpoint = ppaudit::protocol::ParseEndpoint(f.listen);
    if (!endpoint.ok()) return Fail(endpoint.status());
    config->listen = *endpoint;
  }
  config->platform.seed = ResolveSeed(g, config->platform.seed);
  auto population = ppaudit::config::LoadOrGeneratePopulation(*config);
  if (!population.ok()) return Fail(population.status());

  // Block termination signals before any thread starts; sigwait below.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto platform =
      ppaudit::protocol::Platform::Create(config->platform, *std::move(population));
  if (!platform.ok()) return Fail(platform.status());
  auto server = ppaudit::protocol::Server::Start(**platform, config->listen);
  if (!server.ok()) return Fail(server.status());
  std::cerr << "# serve seed=" << config->platform.seed
            << " budget_per_auditor=" << ppaudit::FormatDouble(config->platform.budget_per_auditor)
            << " users=" << (*platform)->population().size()
            << " bins=" << config->platform.domain.size()
            << " bias=" << ppaudit::BiasKindName(config->platform.estimator.bias.kind) << "\n";
  std::cout << "listening on " << (*server)->endpoint().ToString() << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  (*server)->Stop();
  std::cerr << "# stopped on signal " << received << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AuditFlags {
  std::string endpoint = "127.0.0.1:7070";
  std::string roster;
  double alpha = 0.2;
  double delta = 0.05;
  double epsilon = 1.0;
  std::vector<std::string> groups;
  int bins = 10;
  std::vector<double> edges;
  int64_t n = 0;
  std::string auditor_id = "auditor";
  std::string audit_id = "audit";
  std::string content_id = "job-ad";
  std::string content_text;
};

std::string FormatReport(const ppaudit::FairnessReport& report, const ppaudit::AuditSpec& spec) {
  std::ostringstream out;
  const auto& where = report.argmax;
  out << "efg=" << ppaudit::FormatDouble(report.efg) << "\n"
      << "alpha=" << ppaudit::FormatDouble(report.alpha) << "\n"
      << "passed=" << (report.passed ? "true" : "false") << "\n"
      << "mode=" << (report.mode == ppaudit::FairnessReport::Mode::kNoisy ? "noisy" : "exact")
      << "\n"
      << "statistic="
      << (report.statistic == ppaudit::FairnessReport::Statistic::kBins ? "bins"
                                                                        : "complementary_cdf")
      << "\n"
      << "argmax=" << report.group_labels[where.group1] << ","
      << report.group_labels[where.group2] << "," << where.bin;
  if (report.statistic == ppaudit::FairnessReport::Statistic::kBins) {
    out << " (" << spec.domain.labels()[where.bin] << ")";
  }
  out << "\n";
  for (const auto& [group, n] : report.per_group_n) out << "n[" << group << "]=" << n << "\n";
  return out.str();
}

int RunAudit(const Globals& g, const AuditFlags& f) {
  auto endpoint = ppaudit::protocol::ParseEndpoint(f.endpoint);
  if (!endpoint.ok()) return Fail(endpoint.status());
  std::ifstream roster_in(f.roster);
  if (!roster_in) return Fail(absl::NotFoundError(absl::StrCat("cannot open roster ", f.roster)));
  auto roster = ppaudit::ReadPopulation(roster_in);
  if (!roster.ok()) return Fail(roster.status());

  ppaudit::AuditSpec spec;
  spec.alpha = f.alpha;
  spec.delta = f.delta;
  spec.epsilon = f.epsilon;
  std::vector<std::string> labels = f.groups;
  if (labels.empty()) {
    for (const auto& a : roster->attributes()) labels.push_back(a.label);
  }
  auto attributes = ppaudit::MakeAttributes(labels);
  if (!attributes.ok()) return Fail(attributes.status());
  spec.attributes = *attributes;
  auto domain = f.edges.empty() ? ppaudit::ScoreDomain::Discrete(f.bins)
                                : ppaudit::ScoreDomain::Continuous(f.edges);
  if (!domain.ok()) return Fail(domain.status());
  spec.domain = *domain;
  if (auto status = spec.Validate(); !status.ok()) return Fail(status);

  int64_t n = f.n;
  if (n <= 0) {
    auto planned = ppaudit::PlannedSampleSize(spec, /*use_privacy=*/true);
    if (!planned.ok()) return Fail(planned.status());
    n = *planned;
  }
  const uint64_t seed = ResolveSeed(g);
  std::cerr << "# audit endpoint=" << endpoint->ToString() << " seed=" << seed
            << " alpha=" << ppaudit::FormatDouble(spec.alpha)
            << " delta=" << ppaudit::FormatDouble(spec.delta)
            << " epsilon=" << ppaudit::FormatDouble(spec.epsilon) << " groups="
            << absl::StrJoin(labels, ",") << " bins=" << spec.domain.size() << " n=" << n
            << "\n";

  auto audiences = ppaudit::protocol::RecruitAudiences(*roster, spec, n, seed);
  if (!audiences.ok()) return Fail(audiences.status());
  ppaudit::protocol::AuditRequest request;
  request.auditor_id = f.auditor_id;
  request.audit_id = f.audit_id;
  request.content = {f.content_id, f.content_text};
  request.audiences = *std::move(audiences);
  auto outcome = ppaudit::protocol::ClientAudit(*endpoint, spec, request);
  if (!outcome.ok()) return Fail(outcome.status());

  std::string text = FormatReport(outcome->report, spec);
  text += absl::StrCat("planned_n=", outcome->planned_n, "\n",
                       "meets_plan=", outcome->meets_plan ? "true" : "false", "\n",
                       "remaining_budget=", ppaudit::FormatDouble(outcome->remaining_budget),
                       "\n");
  if (!Emit(g, text)) return kExitError;
  return outcome->report.passed ? kExitOk : kExitUnfair;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving platform-supported fairness audits"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  app.add_option("--seed", globals.seed, "Root seed (default: $PPAUDIT_SEED or built-in)");
  app.add_option("--output", globals.output, "Write results here instead of stdout");

  PlanFlags plan;
  auto* plan_cmd = app.add_subcommand("plan", "Minimum qualified samples per group");
  plan_cmd->add_option("--alpha", plan.alpha, "Fairness tolerance")->capture_default_str();
  plan_cmd->add_option("--delta", plan.delta, "Failure probability")->capture_default_str();
  plan_cmd->add_option("--epsilon", plan.epsilon, "Privacy parameter")->capture_default_str();
  plan_cmd->add_option("--groups", plan.groups, "|A|")->capture_default_str();
  plan_cmd->add_option("--bins", plan.bins, "|Y|")->capture_default_str();
  plan_cmd->add_flag("--no-privacy", plan.no_privacy, "Plan for an exact (non-private) release");

  SimulateFlags simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo validation run");
  simulate_cmd->add_option("config", simulate.config, "Experiment config (YAML)")->required();
  simulate_cmd->add_option("--trials", simulate.trials, "Override the trial count");
  simulate_cmd->add_option("--threads", simulate.threads, "Worker threads (0: all cores)");

  FigureFlags figure;
  auto* figure_cmd = app.add_subcommand("figure", "Privacy overhead factor curve as CSV");
  figure_cmd->add_option("--sweep", figure.sweep, "alpha|delta|groups|bins")->required();
  figure_cmd->add_option("--out", globals.output, "Alias for --output");
  figure_cmd->add_option("--alpha", figure.alpha, "Fixed alpha")->capture_default_str();
  figure_cmd->add_option("--delta", figure.delta, "Fixed delta")->capture_default_str();
  figure_cmd->add_option("--groups", figure.groups, "Fixed |A|")->capture_default_str();
  figure_cmd->add_option("--bins", figure.bins, "Fixed |Y|")->capture_default_str();

  ServeFlags serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the platform service");
  serve_cmd->add_option("config", serve.config, "Server config (YAML)")->required();
  serve_cmd->add_option("--listen", serve.listen, "Override host:port (port 0: ephemeral)");

  AuditFlags audit;
  auto* audit_cmd = app.add_subcommand("audit", "Audit a running platform");
  audit_cmd->add_option("--endpoint", audit.endpoint, "host:port")->capture_default_str();
  audit_cmd->add_option("--roster", audit.roster, "Auditor roster (population file)")
      ->required();
  audit_cmd->add_option("--alpha", audit.alpha)->capture_default_str();
  audit_cmd->add_option("--delta", audit.delta)->capture_default_str();
  audit_cmd->add_option("--epsilon", audit.epsilon)->capture_default_str();
  audit_cmd->add_option("--groups", audit.groups, "Group labels (default: roster's)")
      ->delimiter(',');
  audit_cmd->add_option("--bins", audit.bins, "Discrete |Y|")->capture_default_str();
  audit_cmd->add_option("--edges", audit.edges, "Continuous bin edges")->delimiter(',');
  audit_cmd->add_option("--n", audit.n, "Users per group (default: planner minimum)");
  audit_cmd->add_option("--auditor-id", audit.auditor_id)->capture_default_str();
  audit_cmd->add_option("--audit-id", audit.audit_id)->capture_default_str();
  audit_cmd->add_option("--content-id", audit.content_id)->capture_default_str();
  audit_cmd->add_option("--content-text", audit.content_text);

  CLI11_PARSE(app, argc, argv);

  if (*plan_cmd) return RunPlan(globals, plan);
  if (*simulate_cmd) return RunSimulate(globals, simulate);
  if (*figure_cmd) return RunFigure(globals, figure);
  if (*serve_cmd) return RunServe(globals, serve);
  if (*audit_cmd) return RunAudit(globals, audit);
  return kExitError;
}
