// Command-line front end. Parses flags, turns them into an options object
// and hands it to the library through the C interface.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "actlab/actlab.h"

using nlohmann::json;

namespace {

void print_line(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

// Training allocates and frees the same large buffers every step; keeping
// them out of mmap and away from trimming roughly halves the time spent in
// the allocator.
void tune_malloc() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 100000000);
  mallopt(M_TRIM_THRESHOLD, 100000000);
  mallopt(M_TOP_PAD, 10000000);
#endif
}

template <class T>
void put(json& o, const char* key, const CLI::Option* opt, const T& value) {
  if (opt->count() > 0) o[key] = value;
}

}  // namespace

int main(int argc, char** argv) {
  tune_malloc();
  CLI::App app{"Activation function lab: train tiny MLPs, search activations, replay runs."};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out_dir, suite, optimizer, proposer_cmd;
  std::uint64_t budget = 0, steps = 0, seeds = 0;
  std::vector<CLI::Option*> globals;
  auto* o_seed = app.add_option("--seed", seed, "root seed for datasets and search");
  auto* o_out = app.add_option("--out-dir", out_dir, "parent directory for run directories (default runs)");
  auto* o_budget = app.add_option("--budget", budget, "FLOP budget per element (default 64)");
  auto* o_suite = app.add_option("--suite", suite,
                                 "default, table1, smoke or a family name; NAME:N keeps the first N");
  auto* o_steps = app.add_option("--steps", steps, "training steps per run (default 50)");
  auto* o_opt = app.add_option("--optimizer", optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  auto* o_seeds = app.add_option("--seeds", seeds, "evaluation seeds per dataset (default 3)");
  auto* o_prop = app.add_option("--proposer-cmd", proposer_cmd, "external proposer executable");
  globals = {o_seed, o_out, o_budget, o_suite, o_steps, o_opt, o_seeds, o_prop};
  for (auto* g : globals) g->configurable(false);
  app.fallthrough();

  json sub = json::object();  // command-specific options
  std::string command;

  auto* eval = app.add_subcommand("eval", "train and test activations on a suite");
  std::vector<std::string> activations;
  auto* o_acts = eval->add_option("activations", activations, "zoo names or DSL expressions");

  auto* evolve = app.add_subcommand("evolve", "evolutionary activation search");
  std::uint64_t generations = 0, proposals = 0, parents = 0, top_k = 0, max_depth = 0, timeout = 0;
  std::string mutator, instruction_file;
  bool no_batch_stats = false;
  auto* o_gen = evolve->add_option("--generations", generations);
  auto* o_props = evolve->add_option("--proposals", proposals, "proposals per generation");
  auto* o_par = evolve->add_option("--parents", parents, "parents per proposal");
  auto* o_topk = evolve->add_option("--top-k", top_k);
  auto* o_depth = evolve->add_option("--max-depth", max_depth);
  auto* o_mut = evolve->add_option("--mutator", mutator)->check(CLI::IsMember({"grammar", "external"}));
  auto* o_to = evolve->add_option("--proposer-timeout-ms", timeout);
  auto* o_instr = evolve->add_option("--instruction-file", instruction_file)->check(CLI::ExistingFile);
  evolve->add_flag("--no-batch-stats", no_batch_stats, "reject batch-mean and batch-std");

  auto* sweep = app.add_subcommand("sweep", "sweep one constant of an expression template");
  std::string tmpl, slot, mode;
  std::uint64_t count = 0;
  double lo = 0, hi = 0;
  std::vector<double> refs;
  auto* o_tmpl = sweep->add_option("--template", tmpl);
  auto* o_slot = sweep->add_option("--slot", slot);
  auto* o_mode = sweep->add_option("--mode", mode)->check(CLI::IsMember({"grid", "uniform"}));
  auto* o_count = sweep->add_option("--count", count);
  auto* o_lo = sweep->add_option("--lo", lo);
  auto* o_hi = sweep->add_option("--hi", hi);
  auto* o_refs = sweep->add_option("--reference", refs, "values ranked against the samples");

  auto* hist = app.add_subcommand("histogram", "histogram of hidden pre-activations");
  std::string activation, probe;
  std::uint64_t bins = 0, probe_rows = 0;
  std::int64_t dataset = 0;
  double hlo = 0, hhi = 0;
  auto* o_act = hist->add_option("--activation", activation);
  auto* o_bins = hist->add_option("--bins", bins);
  auto* o_hlo = hist->add_option("--lo", hlo);
  auto* o_hhi = hist->add_option("--hi", hhi);
  auto* o_probe = hist->add_option("--probe", probe)->check(CLI::IsMember({"trained", "init", "zero"}));
  auto* o_rows = hist->add_option("--probe-rows", probe_rows);
  auto* o_ds = hist->add_option("--dataset", dataset, "index into the suite, -1 pools all");

  auto* exp = app.add_subcommand("export-dataset", "write suite datasets as CSV");
  std::int64_t index = -1;
  auto* o_index = exp->add_option("--index", index, "one dataset of the suite (default all)");

  auto* replay = app.add_subcommand("replay", "re-run a recorded run and compare its outputs");
  std::string record;
  replay->add_option("record", record, "path to run.json")->required();

  auto* zoo = app.add_subcommand("zoo", "built-in activations");
  zoo->require_subcommand(1);
  auto* zoo_list = zoo->add_subcommand("list", "list built-in activations as CSV");

  CLI11_PARSE(app, argc, argv);

  if (eval->parsed()) {
    command = "eval";
    put(sub, "activations", o_acts, activations);
  } else if (evolve->parsed()) {
    command = "evolve";
    put(sub, "generations", o_gen, generations);
    put(sub, "proposals", o_props, proposals);
    put(sub, "parents", o_par, parents);
    put(sub, "top_k", o_topk, top_k);
    put(sub, "max_depth", o_depth, max_depth);
    put(sub, "mutator", o_mut, mutator);
    put(sub, "proposer_timeout_ms", o_to, timeout);
    if (no_batch_stats) sub["allow_batch_stats"] = false;
    if (o_prop->count() > 0 && o_mut->count() == 0) sub["mutator"] = "external";
    if (o_instr->count() > 0) {
      std::FILE* f = std::fopen(instruction_file.c_str(), "rb");
      std::string text;
      char buf[4096];
      for (std::size_t n; f && (n = std::fread(buf, 1, sizeof buf, f)) > 0;) text.append(buf, n);
      if (f) std::fclose(f);
      sub["instruction"] = text;
    }
  } else if (sweep->parsed()) {
    command = "sweep";
    put(sub, "template", o_tmpl, tmpl);
    put(sub, "slot", o_slot, slot);
    put(sub, "mode", o_mode, mode);
    put(sub, "count", o_count, count);
    put(sub, "lo", o_lo, lo);
    put(sub, "hi", o_hi, hi);
    put(sub, "references", o_refs, refs);
  } else if (hist->parsed()) {
    command = "histogram";
    put(sub, "activation", o_act, activation);
    put(sub, "bins", o_bins, bins);
    put(sub, "lo", o_hlo, hlo);
    put(sub, "hi", o_hhi, hhi);
    put(sub, "probe", o_probe, probe);
    put(sub, "probe_rows", o_rows, probe_rows);
    put(sub, "dataset", o_ds, dataset);
  } else if (exp->parsed()) {
    command = "export-dataset";
    put(sub, "index", o_index, index);
  } else if (replay->parsed()) {
    command = "replay";
    sub["record"] = record;
  } else if (zoo_list->parsed()) {
    command = "zoo-list";
  }

  // Global flags apply where the command has a matching option.
  const char* defaults_text = nullptr;
  if (actlab_normalize_options(command.c_str(), nullptr, &defaults_text) != ACTLAB_OK) {
    std::fprintf(stderr, "error: %s\n", actlab_last_error());
    return 1;
  }
  const json defaults = json::parse(defaults_text);
  json options = json::object();
  auto global = [&](const char* key, const CLI::Option* opt, const auto& value) {
    if (opt->count() == 0) return;
    if (!defaults.contains(key)) {
      std::fprintf(stderr, "warning: %s ignored by %s\n", opt->get_name().c_str(), command.c_str());
      return;
    }
    options[key] = value;
  };
  global("seed", o_seed, seed);
  global("out_dir", o_out, out_dir);
  global("budget", o_budget, budget);
  global("suite", o_suite, suite);
  global("steps", o_steps, steps);
  global("optimizer", o_opt, optimizer);
  global("seeds", o_seeds, seeds);
  global("proposer_cmd", o_prop, proposer_cmd);
  options.update(sub);

  actlab_outcome* outcome = nullptr;
  const std::string text = options.dump();
  const actlab_status st = actlab_run(command.c_str(), text.c_str(), print_line, nullptr, &outcome);
  if (st != ACTLAB_OK) {
    std::fprintf(stderr, "error: %s: %s\n", actlab_status_name(st), actlab_last_error());
    return 1;
  }
  std::fputs(actlab_outcome_text(outcome), stdout);
  actlab_outcome_free(outcome);
  return 0;
}
