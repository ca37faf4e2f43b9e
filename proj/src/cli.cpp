#include "brief/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "brief/accounting.hpp"
#include "brief/descriptor.hpp"
#include "brief/ledger.hpp"
#include "brief/lesion.hpp"
#include "brief/rdcurve.hpp"
#include "brief/run_config.hpp"
#include "brief/search.hpp"
#include "brief/trainer.hpp"

namespace brief {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::string command;
  fs::path config;
  std::optional<double> delta;
  std::optional<std::size_t> scope;
  std::optional<std::string> budget;
  std::optional<fs::path> out;
  std::optional<std::string> oracle;
  std::optional<std::string> kind;
  std::optional<std::string> values;
  std::optional<std::string> indices;
  std::optional<std::string> alphas;
  bool no_brief = false;
};

/// Rendered summary; `failure` is set when outputs are partial.
struct Rendered {
  std::string summary;
  std::optional<std::string> failure;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Ratio> parse_ratio_list(const std::string& key, const std::string& text) {
  std::vector<Ratio> out;
  std::stringstream in(text);
  std::string item;
  try {
    while (std::getline(in, item, ',')) {
      if (item.find_first_not_of(" \t") != std::string::npos) out.push_back(Ratio::parse(item));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
  if (out.empty()) throw ConfigError(key + " must not be empty");
  return out;
}

void apply_flags(RunConfig& cfg, const Flags& f) {
  if (f.delta) cfg.search.delta = *f.delta;
  if (f.scope) cfg.search.scope = *f.scope;
  if (f.budget) cfg.budget.use = *f.budget;
  if (f.oracle) cfg.oracle.kind = *f.oracle;
  if (f.kind) {
    try {
      cfg.lesion.kind = parse_lesion_kind(*f.kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (f.values) cfg.lesion.values = parse_ratio_list("--values", *f.values);
  if (f.indices) cfg.lesion.indices = *f.indices;
  if (f.alphas) cfg.rd.alphas = parse_ratio_list("--alphas", *f.alphas);
  if (f.no_brief) cfg.rd.with_brief = false;
  cfg.validate();
}

fs::path default_run_dir(const std::string& command, const std::string& model_name) {
  const char* root = std::getenv(kRunRootEnv);
  fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  return base / (command + "-" + model_name);
}

std::string mib(std::int64_t bytes) {
  return fmt::format("{:.4f}", static_cast<double>(bytes) / static_cast<double>(kBytesPerMiB));
}

std::string format_widths(const std::vector<int>& widths) { return fmt::format("[{}]", fmt::join(widths, ", ")); }

std::string accuracy_cell(const std::optional<EvaluationRecord>& r) {
  if (!r) return "n/a";
  if (!r->ok()) return std::string(to_string(r->status));
  return fmt::format("{:.4f}", r->top1);
}

/// Everything a command needs to render its outputs into one directory.
struct Context {
  const RunConfig& cfg;
  const ModelSpec& model;
  Oracle& oracle;
  /// Oracle kind the run was configured with (replay keeps the original).
  std::string configured_kind;
  fs::path dir;
  std::ostream& err;
};

Rendered render_reduce(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto partition = partition_macroblocks(ctx.model);
  SearchOptions options;
  options.delta = cfg.search.delta;
  options.scope = cfg.search.scope.value_or(0);
  options.beta_return = cfg.search.beta_return;

  const TrainingBudget& budget = cfg.active_budget();
  ReductionResult result = cfg.search.direction == Direction::backward
                               ? brief_backward_reduction(ctx.model, partition, options, ctx.oracle, budget)
                               : forward_reduction(ctx.model, partition, options, ctx.oracle, budget);

  json report = to_json(result);
  std::optional<EvaluationRecord> final_eval;
  if (ctx.configured_kind == "external") {
    final_eval = ctx.oracle.evaluate(ctx.model, result.reduced_config, cfg.budget.final);
    report["final_evaluation"] = to_json(*final_eval);
  }
  write_text(ctx.dir / "report.json", report.dump(2) + "\n");

  std::vector<std::string> betas;
  for (const auto& b : result.betas) betas.push_back(b.str());
  std::string s;
  s += fmt::format("model        {}\n", result.model_name);
  s += fmt::format("search       {}, delta {}, {} of {} blocks\n", to_string(result.direction),
                   format_double(options.delta), result.scope.size(), partition.size());
  s += fmt::format("betas        {}\n", fmt::join(betas, " "));
  s += fmt::format("widths       {} -> {}\n", format_widths(partition.widths),
                   format_widths(result.reduced_block_widths()));
  s += "\n";
  s += fmt::format("{:<13}{:>14}{:>14}\n", "", "baseline", "reduced");
  s += fmt::format("{:<13}{:>14}{:>14}\n", "top1", accuracy_cell(result.baseline), accuracy_cell(result.reduced_evaluation));
  if (final_eval) s += fmt::format("{:<13}{:>14}{:>14}\n", "top1 (final)", "", accuracy_cell(final_eval));
  s += fmt::format("{:<13}{:>14}{:>14}\n", "params", result.base_report.parameter_count,
                   result.reduced_report.parameter_count);
  s += fmt::format("{:<13}{:>14}{:>14}\n", "size bytes", result.base_report.size_bytes,
                   result.reduced_report.size_bytes);
  s += fmt::format("{:<13}{:>14}{:>14}\n", "size MiB", mib(result.base_report.size_bytes),
                   mib(result.reduced_report.size_bytes));
  s += fmt::format("saving       {:.2f}%\n", result.saving_percent());
  for (const auto& d : result.diagnostics) s += "note: " + d + "\n";
  write_text(ctx.dir / "summary.txt", s);

  if (!result.exhausted_blocks.empty())
    return {s, fmt::format("oracle exhausted on block(s) {}", fmt::join(result.exhausted_blocks, ", "))};
  if (final_eval && !final_eval->ok())
    return {s, "final-budget evaluation " + std::string(to_string(final_eval->status))};
  return {s, std::nullopt};
}

Rendered render_lesion(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto& lesion = cfg.lesion;
  std::string s;
  std::size_t failures = 0;
  std::size_t total = 0;
  if (lesion.kind == LesionKind::macroblock_scale) {
    const auto partition = partition_macroblocks(ctx.model);
    const auto blocks = parse_index_list(lesion.indices, 0, partition.size());
    const auto groups =
        run_macroblock_rd_sweep(ctx.model, partition, lesion.values, ctx.oracle, cfg.active_budget(), blocks);
    write_rd_points_csv(groups, ctx.dir / "rd_points.csv");
    s += fmt::format("{:<8}{:>8}{:>14}{:>12}{:>10}\n", "block", "k", "params", "size bytes", "top1");
    for (const auto& group : groups) {
      for (const auto& p : group) {
        ++total;
        if (p.status != EvalStatus::ok) ++failures;
        s += fmt::format("{:<8}{:>8}{:>14}{:>12}{:>10}\n", p.block_id, p.k.str(), p.point.params, p.point.size_bytes,
                         p.status == EvalStatus::ok ? fmt::format("{:.4f}", p.point.top1)
                                                    : std::string(to_string(p.status)));
      }
    }
  } else {
    SweepPlan plan;
    plan.kind = lesion.kind;
    plan.values = lesion.values;
    plan.indices = lesion.indices == "all" ? default_lesion_indices(ctx.model)
                                           : parse_index_list(lesion.indices, 1, ctx.model.nominal.channels.size());
    plan.budget = cfg.active_budget();
    const auto points = run_onehot_sweep(ctx.model, plan, ctx.oracle);
    write_onehot_csv(points, ctx.dir / "onehot.csv");
    s += fmt::format("{:<8}{:>10}  {:<40}{:>10}\n", "index", to_string(lesion.kind), "channels", "top1");
    for (const auto& p : points) {
      ++total;
      if (!p.record.ok()) ++failures;
      s += fmt::format("{:<8}{:>10}  {:<40}{:>10}\n", p.index, p.parameter.str(), to_string(p.config),
                       accuracy_cell(p.record));
    }
  }
  s += fmt::format("{} evaluations, {} failed\n", total, failures);
  write_text(ctx.dir / "summary.txt", s);
  if (failures > 0) return {s, fmt::format("{} lesion evaluation(s) failed", failures)};
  return {s, std::nullopt};
}

std::string curve_table(const std::vector<RDPoint>& points) {
  std::string s = fmt::format("{:<22}{:>14}{:>12}{:>10}\n", "label", "params", "size MiB", "top1");
  for (const auto& p : points) s += fmt::format("{:<22}{:>14}{:>12}{:>10.4f}\n", p.label, p.params, mib(p.size_bytes), p.top1);
  return s;
}

Rendered render_rd(const Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const TrainingBudget& budget = cfg.active_budget();
  const auto alpha_curve = build_alpha_curve(ctx.model, cfg.rd.alphas, ctx.oracle, budget);
  export_curve(alpha_curve, ctx.dir / "rd_curve.csv");
  export_gnuplot(alpha_curve, ctx.dir / "rd_curve.dat");
  std::string s = "alpha scaling\n" + curve_table(alpha_curve);
  std::size_t missing = cfg.rd.alphas.size() - alpha_curve.size();

  if (cfg.rd.with_brief) {
    SearchOptions options;
    options.delta = cfg.search.delta;
    options.scope = cfg.search.scope.value_or(0);
    options.beta_return = cfg.search.beta_return;
    const auto brief_curve = build_alpha_plus_brief_curve(ctx.model, cfg.rd.alphas, options, ctx.oracle, budget);
    export_curve(brief_curve, ctx.dir / "rd_curve_brief.csv");
    export_gnuplot(brief_curve, ctx.dir / "rd_curve_brief.dat");
    s += "\nalpha scaling + backward reduction\n" + curve_table(brief_curve);
    missing += cfg.rd.alphas.size() - brief_curve.size();
  }
  write_text(ctx.dir / "summary.txt", s);
  if (missing > 0) return {s, fmt::format("{} curve point(s) missing after failed evaluations", missing)};
  return {s, std::nullopt};
}

std::string size_table(const SizeReport& r) {
  std::string s;
  s += fmt::format("parameters       {}\n", r.parameter_count);
  s += fmt::format("buffers          {}\n", r.buffer_count);
  s += fmt::format("stored scalars   {}\n", r.stored_scalars());
  s += fmt::format("size bytes       {}\n", r.size_bytes);
  s += fmt::format("size MiB         {}\n", mib(r.size_bytes));
  s += fmt::format("{:<8}{:>14}{:>12}{:>14}\n", "block", "params", "buffers", "bytes");
  for (const auto& b : r.per_block_breakdown)
    s += fmt::format("{:<8}{:>14}{:>12}{:>14}\n", b.block_id, b.params, b.buffers, b.bytes);
  s += fmt::format("{:<8}{:>14}{:>12}\n", "head", r.head_params, r.head_buffers);
  return s;
}

Rendered render_size(const Context& ctx) {
  const auto base = count_parameters(ctx.model);
  std::string s = fmt::format("model            {}\n", ctx.model.name) + size_table(base);
  std::string csv = "config," + size_report_csv_header() + "\n" + "nominal," + size_report_csv_row(base) + "\n";

  const auto& trailing = ctx.cfg.model.reduced_trailing_widths;
  if (!trailing.empty()) {
    const auto partition = partition_macroblocks(ctx.model);
    if (trailing.size() > partition.size())
      throw ConfigError(fmt::format("model.reduced_trailing_widths has {} entries but the model has {} blocks",
                                    trailing.size(), partition.size()));
    ChannelConfig reduced = ctx.model.nominal;
    const std::size_t first = partition.size() - trailing.size();
    try {
      for (std::size_t i = 0; i < trailing.size(); ++i) reduced = set_block_width(reduced, partition, first + i, trailing[i]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("model.reduced_trailing_widths: ") + e.what());
    }
    const auto small = count_parameters(ctx.model, reduced);
    s += fmt::format("\nreduced trailing widths {}\n", format_widths(trailing)) + size_table(small);
    s += fmt::format("saving           {:.2f}%\n", saving_percent(base, small));
    csv += "reduced," + size_report_csv_row(small) + "\n";
  }
  write_text(ctx.dir / "size.csv", csv);
  write_text(ctx.dir / "summary.txt", s);
  return {s, std::nullopt};
}

Rendered render(const std::string& command, const Context& ctx) {
  if (command == "reduce") return render_reduce(ctx);
  if (command == "lesion") return render_lesion(ctx);
  if (command == "rd") return render_rd(ctx);
  if (command == "size") return render_size(ctx);
  throw ConfigError("unknown command '" + command + "'");
}

bool needs_oracle(const std::string& command) { return command != "size"; }

std::unique_ptr<Oracle> make_inner_oracle(const RunConfig& cfg, const ModelSpec& model) {
  if (cfg.oracle.kind == "surrogate") {
    auto partition = partition_macroblocks(model);
    auto params = cfg.surrogate_params(partition.size());
    auto oracle = std::make_unique<SurrogateOracle>(std::move(partition), std::move(params));
    oracle->set_parallelism(cfg.oracle.parallelism);
    return oracle;
  }
  TrainerOptions options;
  options.command = cfg.oracle.trainer_command;
  options.parallelism = cfg.oracle.parallelism;
  options.timeout_seconds = cfg.oracle.timeout_seconds;
  return std::make_unique<ExternalTrainerOracle>(std::move(options));
}

void emit(const Rendered& r, RunOutcome& outcome, std::ostream& out, std::ostream& err) {
  out << r.summary;
  if (r.failure) {
    err << "error: " << *r.failure << " (partial outputs in " << outcome.run_dir.string() << ")\n";
    outcome.exit_code = 1;
  }
}

void report_ledger_warnings(const Ledger& ledger, std::ostream& err) {
  for (const auto& w : ledger.warnings()) err << "warning: " << w << '\n';
}

RunOutcome run_fresh(RunConfig cfg, const Flags& flags, std::ostream& out, std::ostream& err) {
  const ModelSpec model = cfg.build_model();
  fs::path dir = flags.out ? *flags.out : !cfg.run_dir.empty() ? cfg.run_dir : default_run_dir(flags.command, model.name);
  dir = fs::absolute(dir).lexically_normal();
  fs::create_directories(dir);

  cfg.command = flags.command;
  cfg.run_dir = dir;
  write_text(dir / "config.ini", cfg.to_ini());
  write_text(dir / "model.json", model_to_json(model).dump(2) + "\n");

  RunOutcome outcome;
  outcome.run_dir = dir;
  const fs::path ledger_path = dir / "ledger.jsonl";

  if (!needs_oracle(flags.command)) {
    SurrogateOracle unused(partition_macroblocks(model), SurrogateParams::defaults(model.nominal.num_blocks()));
    emit(render(flags.command, Context{cfg, model, unused, cfg.oracle.kind, dir, err}), outcome, out, err);
    return outcome;
  }

  if (cfg.oracle.kind == "replay") {
    const fs::path source = cfg.oracle.ledger.empty() ? ledger_path : cfg.oracle.ledger;
    if (!fs::exists(source)) throw ConfigError("no ledger to replay at " + source.string());
    if (!fs::exists(ledger_path) || !fs::equivalent(source, ledger_path))
      fs::copy_file(source, ledger_path, fs::copy_options::overwrite_existing);
    Ledger ledger(ledger_path, false);
    report_ledger_warnings(ledger, err);
    ReplayOracle oracle(ledger);
    emit(render(flags.command, Context{cfg, model, oracle, cfg.oracle.kind, dir, err}), outcome, out, err);
    return outcome;
  }

  auto inner = make_inner_oracle(cfg, model);
  Ledger ledger(ledger_path);
  report_ledger_warnings(ledger, err);
  RecordingOracle oracle(*inner, ledger);
  emit(render(flags.command, Context{cfg, model, oracle, cfg.oracle.kind, dir, err}), outcome, out, err);
  outcome.fresh_evaluations = oracle.forwarded();
  return outcome;
}

RunOutcome run_replay(const RunConfig& cfg, const Flags& flags, std::ostream& out, std::ostream& err) {
  if (cfg.command.empty() || cfg.command == "replay")
    throw ConfigError("replay needs the config.ini of a run directory (run.command is missing)");
  const fs::path src = fs::absolute(flags.config).parent_path();
  const fs::path model_path = src / "model.json";
  if (!fs::exists(model_path)) throw ConfigError("run directory has no model.json: " + src.string());

  fs::path dir = flags.out ? fs::absolute(*flags.out).lexically_normal() : src / "replay";
  fs::create_directories(dir);
  if (fs::equivalent(dir, src)) throw ConfigError("replay output must differ from the run directory");

  for (const char* name : {"config.ini", "model.json", "ledger.jsonl"}) {
    if (fs::exists(src / name)) fs::copy_file(src / name, dir / name, fs::copy_options::overwrite_existing);
  }

  ModelSpec model;
  try {
    model = load_model_descriptor(model_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  RunOutcome outcome;
  outcome.run_dir = dir;
  const fs::path ledger_path =
      cfg.oracle.kind == "replay" && !cfg.oracle.ledger.empty() ? cfg.oracle.ledger : src / "ledger.jsonl";
  if (needs_oracle(cfg.command) && !fs::exists(ledger_path))
    throw ConfigError("no ledger to replay at " + ledger_path.string());
  std::optional<Ledger> ledger;
  if (needs_oracle(cfg.command)) {
    ledger.emplace(ledger_path, false);
  } else {
    ledger.emplace();
  }
  report_ledger_warnings(*ledger, err);
  ReplayOracle oracle(*ledger);
  emit(render(cfg.command, Context{cfg, model, oracle, cfg.oracle.kind, dir, err}), outcome, out, err);
  return outcome;
}

RunOutcome dispatch(const Flags& flags, std::ostream& out, std::ostream& err) {
  RunConfig cfg = RunConfig::load(flags.config);
  for (const auto& w : cfg.warnings) err << "warning: " << w << '\n';
  if (flags.command == "replay") return run_replay(cfg, flags, out, err);
  apply_flags(cfg, flags);
  return run_fresh(std::move(cfg), flags, out, err);
}

}  // namespace

RunOutcome run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Backward reduction of CNN channel widths", "brief"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Run configuration (INI)")->required();
    sub->add_option("--out", flags.out, "Run directory");
    if (sub->get_name() == "replay" || sub->get_name() == "size") return;
    sub->add_option("--delta", flags.delta, "Distortion budget in (0, 1)");
    sub->add_option("--scope", flags.scope, "Number of trailing macroblocks to search")
        ->check(CLI::PositiveNumber);
    sub->add_option("--budget", flags.budget, "Training budget for evaluations")
        ->check(CLI::IsMember({"search", "final"}));
    sub->add_option("--oracle", flags.oracle, "Accuracy oracle")
        ->check(CLI::IsMember({"surrogate", "replay", "external"}));
  };

  auto* reduce = app.add_subcommand("reduce", "Backward (or forward) width reduction");
  auto* lesion = app.add_subcommand("lesion", "One-hot or per-macroblock lesion sweep");
  auto* rd = app.add_subcommand("rd", "Rate-distortion curves for alpha scaling with and without reduction");
  auto* size = app.add_subcommand("size", "Parameter count and model size");
  auto* replay = app.add_subcommand("replay", "Re-render a run's outputs from its ledger");
  for (auto* sub : {reduce, lesion, rd, size, replay}) add_common(sub);
  lesion->add_option("--kind", flags.kind, "constant | proportional | macroblock_scale");
  lesion->add_option("--values", flags.values, "Comma-separated widths or factors");
  lesion->add_option("--indices", flags.indices, "Channel (or block) indices, e.g. all or 1-5,9");
  rd->add_option("--alphas", flags.alphas, "Comma-separated alpha values");
  rd->add_flag("--no-brief", flags.no_brief, "Skip the alpha + reduction curve");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    RunOutcome outcome;
    outcome.exit_code = app.exit(e, out, err) == 0 ? 0 : 2;
    return outcome;
  }
  for (auto* sub : app.get_subcommands()) flags.command = sub->get_name();

  RunOutcome outcome;
  try {
    outcome = dispatch(flags, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    outcome.exit_code = 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    outcome.exit_code = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    outcome.exit_code = 1;
  }
  return outcome;
}

}  // namespace brief
