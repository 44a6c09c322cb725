#include "actlab/lab.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "actlab/error.hpp"
#include "actlab/evolve.hpp"
#include "actlab/record.hpp"
#include "actlab/zoo.hpp"

namespace actlab::lab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); }

// ---- options --------------------------------------------------------------

json common_defaults() {
  return {{"seed", 0},           {"out_dir", "runs"}, {"suite", "default"},
          {"steps", 50},         {"optimizer", "adam"}, {"seeds", 3},
          {"budget", 64}};
}

json command_defaults(const std::string& command) {
  json d = common_defaults();
  if (command == "eval") {
    d["activations"] = {"relu", "gelu", "gelusine", "gelusinc", "gmtu", "turbulent"};
  } else if (command == "evolve") {
    d.update({{"generations", 200},
              {"proposals", 8},
              {"parents", 2},
              {"top_k", 16},
              {"mutator", "grammar"},
              {"allow_batch_stats", true},
              {"max_depth", 12},
              {"proposer_cmd", ""},
              {"proposer_timeout_ms", 60000},
              {"instruction", ""}});
  } else if (command == "sweep") {
    d.update({{"template", "(add (gelu x) (mul alpha (sin x)))"},
              {"slot", "alpha"},
              {"mode", "uniform"},
              {"count", 16},
              {"lo", 0.0},
              {"hi", 1.0},
              {"references", json::array()}});
  } else if (command == "histogram") {
    d.update({{"activation", "gelusine"},
              {"bins", 80},
              {"lo", -4.0},
              {"hi", 4.0},
              {"probe", "trained"},
              {"probe_rows", 128},
              {"dataset", 0}});
  } else if (command == "export-dataset") {
    d = {{"seed", 0}, {"out_dir", "runs"}, {"suite", "default"}, {"index", -1}};
  } else if (command == "replay") {
    d = {{"record", ""}, {"out_dir", "runs"}};
  } else if (command == "zoo-list") {
    d = json::object();
  } else {
    bad("unknown command '" + command + "'");
  }
  return d;
}

bool same_type(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // Integers may not stand in for unsigned/float slots the other way.
    if (a.is_number_float()) return true;
    return b.is_number_integer();
  }
  return a.type() == b.type();
}

template <class T>
T get(const json& o, const char* key) {
  return o.at(key).get<T>();
}

std::uint64_t get_count(const json& o, const char* key, std::uint64_t min = 1) {
  const json& v = o.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < static_cast<std::int64_t>(min)) {
    bad(std::string("option '") + key + "' must be an integer >= " + std::to_string(min));
  }
  return v.get<std::uint64_t>();
}

MlpConfig mlp_from(const json& o) {
  MlpConfig cfg;
  cfg.train_steps = get_count(o, "steps");
  cfg.optimizer = optimizer_from_string(get<std::string>(o, "optimizer"));
  cfg.validate();
  return cfg;
}

std::vector<std::uint64_t> eval_seeds(const json& o) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t i = 0; i < get_count(o, "seeds"); ++i) out.push_back(i);
  return out;
}

// ---- formatting -----------------------------------------------------------

std::string num(double v) { return format_double(v); }

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

std::string table(const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) w[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], r[i].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      out << (i ? "  " : "") << cell;
      if (i + 1 < w.size()) out << std::string(w[i] - cell.size(), ' ');
    }
    out << "\n";
  };
  line(header);
  std::vector<std::string> rule;
  for (auto n : w) rule.push_back(std::string(n, '-'));
  line(rule);
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

// ---- run directory bookkeeping -------------------------------------------

class Run {
 public:
  Run(const std::string& command, const json& config)
      : start_(Clock::now()) {
    dir_ = create_run_dir(config.at("out_dir").get<std::string>(), config.dump());
    record_ = {{"schema_version", kRunRecordSchema},
               {"command", command},
               {"config", config},
               {"created", utc_stamp()},
               {"artifacts", json::object()}};
  }

  json& record() { return record_; }
  const std::string& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(dir_) / name, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorKind::Io, "cannot write " + name);
    record_["artifacts"][name] = sha256_hex(content);
  }

  Outcome finish(std::string text) {
    record_["wall_seconds"]["total"] = seconds_since(start_);
    std::ofstream out(fs::path(dir_) / "run.json", std::ios::binary);
    out << record_.dump(2) << "\n";
    if (!out) throw Error(ErrorKind::Io, "cannot write run.json");
    text += "run directory: " + dir_ + "\n";
    return {dir_, std::move(text), record_};
  }

 private:
  Clock::time_point start_;
  std::string dir_;
  json record_;
};

json specs_json(const std::vector<DatasetSpec>& specs) {
  json out = json::array();
  for (const auto& s : specs) out.push_back(to_json(s));
  return out;
}

std::vector<SampleSet> realize_all(const std::vector<DatasetSpec>& specs) {
  std::vector<SampleSet> out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(realize(s));
  return out;
}

// ---- eval -----------------------------------------------------------------

struct ActivationRow {
  std::string name;
  std::optional<std::uint64_t> flops;
  std::vector<double> train, ood;
  std::size_t diverged = 0;
  std::size_t failed = 0;
  std::string error;
};

Outcome cmd_eval(const json& o, const LineFn& progress) {
  const std::uint64_t seed = get<std::uint64_t>(o, "seed");
  const auto specs = resolve_suite(get<std::string>(o, "suite"), seed);
  const auto seeds = eval_seeds(o);
  const MlpConfig mlp = mlp_from(o);
  const auto names = get<std::vector<std::string>>(o, "activations");
  if (names.empty()) bad("no activations to evaluate");

  Run run("eval", o);
  run.record()["seeds"] = {{"root", seed}, {"eval", seeds}};
  run.record()["datasets"] = specs_json(specs);
  run.record()["mlp"] = to_json(mlp);
  const auto sets = realize_all(specs);

  std::ostringstream results;
  results << "activation,dataset,family,eval_seed,train_mse,ood_mse,diverged\n";
  std::vector<ActivationRow> rows;
  json wall = json::object();
  for (const auto& name : names) {
    const auto t0 = Clock::now();
    ActivationRow row;
    row.name = name;
    try {
      const Activation act = resolve_activation(name);
      if (act.expr()) row.flops = cost(*act.expr());
      for (std::size_t d = 0; d < specs.size(); ++d) {
        for (auto s : seeds) {
          try {
            const TrialResult r = run_trial(act, sets[d], mlp, trial_seed(s, specs[d]));
            row.train.push_back(r.train_mse);
            row.ood.push_back(r.ood_mse);
            row.diverged += r.diverged;
            results << csv_field(name) << "," << d << "," << to_string(specs[d].family()) << ","
                    << s << "," << num(r.train_mse) << "," << num(r.ood_mse) << ","
                    << (r.diverged ? 1 : 0) << "\n";
          } catch (const Error& e) {
            ++row.failed;
            row.error = e.what();
          }
        }
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    wall[name] = seconds_since(t0);
    if (progress) {
      progress(name + ": " +
               (row.ood.empty() ? "failed: " + row.error
                                : "mean OOD MSE " + sci(mean_sd(row.ood).mean)));
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream summary;
  summary << "activation,flop_cost,train_mse_mean,train_mse_sd,ood_mse_mean,ood_mse_sd,trials,"
             "diverged,failed,error\n";
  std::vector<std::vector<std::string>> text_rows;
  json res = json::array();
  for (const auto& r : rows) {
    const MeanSd tr = mean_sd(r.train), te = mean_sd(r.ood);
    const bool any = !r.ood.empty();
    summary << csv_field(r.name) << "," << (r.flops ? std::to_string(*r.flops) : "") << ","
            << (any ? num(tr.mean) : "") << "," << (any ? num(tr.sd) : "") << ","
            << (any ? num(te.mean) : "") << "," << (any ? num(te.sd) : "") << "," << r.ood.size()
            << "," << r.diverged << "," << r.failed << "," << csv_field(r.error) << "\n";
    text_rows.push_back({r.name, r.flops ? std::to_string(*r.flops) : "-",
                         any ? sci(tr.mean) + " ± " + sci(tr.sd) : "failed",
                         any ? sci(te.mean) + " ± " + sci(te.sd) : "failed",
                         r.error.empty() ? "" : r.error});
    json jr = {{"activation", r.name}, {"trials", r.ood.size()}, {"diverged", r.diverged},
               {"failed", r.failed},   {"error", r.error}};
    if (r.flops) jr["flop_cost"] = *r.flops;
    if (any) {
      jr["train_mse"] = {{"mean", tr.mean}, {"sd", tr.sd}};
      jr["ood_mse"] = {{"mean", te.mean}, {"sd", te.sd}};
    }
    res.push_back(jr);
  }
  run.write("results.csv", results.str());
  run.write("summary.csv", summary.str());
  run.record()["results"] = res;
  run.record()["wall_seconds"]["activations"] = wall;
  return run.finish(table({"activation", "flops", "train MSE", "OOD test MSE", "note"}, text_rows));
}

// ---- evolve ---------------------------------------------------------------

std::string candidates_csv(const CandidateDb& db) {
  std::ostringstream out;
  out << "id,generation,status,fitness,flop_cost,parents,expr,error\n";
  for (const auto& c : db.log()) {
    std::string parents;
    for (std::size_t i = 0; i < c.parent_ids.size(); ++i)
      parents += (i ? ";" : "") + std::to_string(c.parent_ids[i]);
    out << c.id << "," << c.generation << "," << to_string(c.status) << ","
        << (c.status == CandidateStatus::Scored ? num(c.fitness) : "") << "," << c.flop_cost
        << "," << parents << "," << csv_field(c.expr_text) << "," << csv_field(c.error) << "\n";
  }
  return out.str();
}

Outcome cmd_evolve(const json& o, const LineFn& progress) {
  EvolveConfig cfg;
  const std::uint64_t seed = get<std::uint64_t>(o, "seed");
  cfg.generations = get_count(o, "generations", 0);
  cfg.proposals_per_generation = get_count(o, "proposals");
  cfg.parents_per_prompt = get_count(o, "parents");
  cfg.top_k = get_count(o, "top_k");
  cfg.budget.max_flops_per_element = get_count(o, "budget", 0);
  cfg.datasets = resolve_suite(get<std::string>(o, "suite"), seed);
  cfg.eval_seeds = eval_seeds(o);
  const std::string mutator = get<std::string>(o, "mutator");
  if (mutator == "grammar") {
    cfg.mutator = MutatorKind::Grammar;
  } else if (mutator == "external") {
    cfg.mutator = MutatorKind::External;
  } else {
    bad("mutator must be grammar or external");
  }
  cfg.allow_batch_stats = get<bool>(o, "allow_batch_stats");
  cfg.max_depth = get_count(o, "max_depth");
  cfg.mlp = mlp_from(o);
  cfg.seed = seed;
  cfg.proposer.command = get<std::string>(o, "proposer_cmd");
  cfg.proposer.timeout = std::chrono::milliseconds(get_count(o, "proposer_timeout_ms"));
  cfg.proposer.instruction = get<std::string>(o, "instruction");
  if (cfg.mutator == MutatorKind::External && cfg.proposer.command.empty()) {
    bad("the external mutator needs --proposer-cmd");
  }
  cfg.validate();

  Run run("evolve", o);
  run.record()["seeds"] = {{"root", seed}, {"eval", cfg.eval_seeds}};
  run.record()["datasets"] = specs_json(cfg.datasets);
  run.record()["mlp"] = to_json(cfg.mlp);

  std::unique_ptr<ProcessProposer> proposer;
  if (cfg.mutator == MutatorKind::External) {
    proposer = std::make_unique<ProcessProposer>(cfg.proposer.command, cfg.proposer.timeout);
  }
  CandidateDb db = seed_db(cfg);
  if (progress) progress("seed (relu x) fitness " + sci(db.best()->fitness));
  const EvolveResult result = actlab::run(cfg, std::move(db), proposer.get(), [&](const GenerationRecord& g) {
    if (progress) {
      progress("generation " + std::to_string(g.generation) + " best " + sci(g.best_fitness) +
               " " + g.best_expr + " (" + std::to_string(g.scored) + " scored, " +
               std::to_string(g.rejected) + " over budget, " + std::to_string(g.failed) +
               " failed)");
    }
  });

  std::ostringstream gens;
  gens << "generation,best_fitness,best_expr,proposed,scored,rejected,failed\n";
  json gen_wall = json::array();
  for (const auto& g : result.generations) {
    gens << g.generation << "," << num(g.best_fitness) << "," << csv_field(g.best_expr) << ","
         << g.proposed << "," << g.scored << "," << g.rejected << "," << g.failed << "\n";
    gen_wall.push_back(g.wall_seconds);
  }
  const Candidate& best = *result.db.best();
  run.write("candidates.csv", candidates_csv(result.db));
  run.write("generations.csv", gens.str());
  run.write("best_expr.txt", best.expr_text + "\n");

  json top = json::array();
  std::vector<std::vector<std::string>> rows;
  std::size_t rank = 0;
  for (auto id : result.db.top()) {
    const Candidate& c = result.db.at(id);
    top.push_back({{"id", c.id}, {"expr", c.expr_text}, {"fitness", c.fitness},
                   {"flop_cost", c.flop_cost}, {"generation", c.generation}});
    rows.push_back({std::to_string(++rank), sci(c.fitness), std::to_string(c.flop_cost),
                    std::to_string(c.generation), c.expr_text});
  }
  run.record()["results"] = {{"seed_fitness", result.db.at(0).fitness},
                             {"best", top.front()},
                             {"top", top},
                             {"candidates", result.db.log().size()}};
  run.record()["wall_seconds"]["generations"] = gen_wall;
  return run.finish(table({"rank", "fitness", "flops", "generation", "expr"}, rows));
}

// ---- sweep ----------------------------------------------------------------

struct SweepRow {
  double alpha = 0.0;
  bool reference = false;
  std::vector<double> train, ood;
  std::size_t failed = 0;
  std::string error;
  double mean_ood() const { return ood.empty() ? INFINITY : mean_sd(ood).mean; }
};

SweepRow sweep_row(double alpha, bool reference = false) {
  SweepRow r;
  r.alpha = alpha;
  r.reference = reference;
  return r;
}

Outcome cmd_sweep(const json& o, const LineFn& progress) {
  const std::uint64_t seed = get<std::uint64_t>(o, "seed");
  const auto specs = resolve_suite(get<std::string>(o, "suite"), seed);
  const auto seeds = eval_seeds(o);
  const MlpConfig mlp = mlp_from(o);
  const std::string tmpl = get<std::string>(o, "template");
  const std::string slot = get<std::string>(o, "slot");
  const std::string mode = get<std::string>(o, "mode");
  const std::size_t count = get_count(o, "count", 2);
  const double lo = get<double>(o, "lo"), hi = get<double>(o, "hi");
  const auto refs = get<std::vector<double>>(o, "references");
  if (!(lo < hi)) throw Error(ErrorKind::BadRange, "sweep needs lo < hi");
  if (parse_template(tmpl, slot, 1.0) == parse_template(tmpl, slot, 2.0)) {
    bad("template has no '" + slot + "' slot");
  }

  std::vector<SweepRow> rows;
  if (mode == "grid") {
    for (std::size_t i = 0; i < count; ++i)
      rows.push_back(sweep_row(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1)));
  } else if (mode == "uniform") {
    SeededRng rng = SeededRng(seed).substream("sweep");
    for (std::size_t i = 0; i < count; ++i) {
      double a = lo;
      while (a == lo) a = rng.uniform(lo, hi);  // open interval
      rows.push_back(sweep_row(a));
    }
  } else {
    bad("sweep mode must be grid or uniform");
  }
  for (double r : refs) rows.push_back(sweep_row(r, true));

  Run run("sweep", o);
  run.record()["seeds"] = {{"root", seed}, {"eval", seeds}};
  run.record()["datasets"] = specs_json(specs);
  run.record()["mlp"] = to_json(mlp);
  const auto sets = realize_all(specs);

  for (auto& row : rows) {
    try {
      const Activation act = Activation::from_expr(parse_template(tmpl, slot, row.alpha));
      for (std::size_t d = 0; d < specs.size(); ++d) {
        for (auto s : seeds) {
          try {
            const TrialResult r = run_trial(act, sets[d], mlp, trial_seed(s, specs[d]));
            row.train.push_back(r.train_mse);
            row.ood.push_back(r.ood_mse);
          } catch (const Error& e) {
            ++row.failed;
            row.error = e.what();
          }
        }
      }
    } catch (const Error& e) {
      row.error = e.what();
    }
    if (progress) progress(slot + "=" + num(row.alpha) + ": mean OOD MSE " + sci(row.mean_ood()));
  }

  // Rank among the sampled values, each reference ranked against the samples alone.
  auto rank_of = [&](const SweepRow& r) {
    std::size_t better = 0;
    for (const auto& s : rows)
      if (!s.reference && &s != &r && s.mean_ood() < r.mean_ood()) ++better;
    return better + 1;
  };

  std::vector<const SweepRow*> by_alpha;
  for (const auto& r : rows) by_alpha.push_back(&r);
  std::stable_sort(by_alpha.begin(), by_alpha.end(),
                   [](const SweepRow* a, const SweepRow* b) { return a->alpha < b->alpha; });
  std::ostringstream csv;
  csv << "alpha,ood_mse_mean,ood_mse_sd,train_mse_mean,rank,reference,trials,failed\n";
  json res = json::array();
  for (const SweepRow* r : by_alpha) {
    const bool any = !r->ood.empty();
    const MeanSd te = mean_sd(r->ood), tr = mean_sd(r->train);
    csv << num(r->alpha) << "," << (any ? num(te.mean) : "") << "," << (any ? num(te.sd) : "")
        << "," << (any ? num(tr.mean) : "") << "," << rank_of(*r) << ","
        << (r->reference ? 1 : 0) << "," << r->ood.size() << "," << r->failed << "\n";
    json jr = {{"alpha", r->alpha}, {"rank", rank_of(*r)}, {"reference", r->reference},
               {"failed", r->failed}, {"error", r->error}};
    if (any) jr["ood_mse"] = {{"mean", te.mean}, {"sd", te.sd}};
    res.push_back(jr);
  }
  run.write("sweep.csv", csv.str());

  std::vector<const SweepRow*> by_loss = by_alpha;
  std::stable_sort(by_loss.begin(), by_loss.end(), [](const SweepRow* a, const SweepRow* b) {
    return a->mean_ood() < b->mean_ood();
  });
  std::vector<std::vector<std::string>> rows_text;
  for (const SweepRow* r : by_loss) {
    rows_text.push_back({num(r->alpha), r->ood.empty() ? "failed" : sci(r->mean_ood()),
                         std::to_string(rank_of(*r)) + "/" + std::to_string(count + (r->reference ? 1 : 0)),
                         r->reference ? "reference" : ""});
  }
  run.record()["results"] = res;
  return run.finish(table({slot, "mean OOD MSE", "rank", ""}, rows_text));
}

// ---- histogram ------------------------------------------------------------

Outcome cmd_histogram(const json& o, const LineFn& progress) {
  const std::uint64_t seed = get<std::uint64_t>(o, "seed");
  const auto specs = resolve_suite(get<std::string>(o, "suite"), seed);
  const auto seeds = eval_seeds(o);
  MlpConfig mlp = mlp_from(o);
  const std::size_t bins = get_count(o, "bins");
  const double lo = get<double>(o, "lo"), hi = get<double>(o, "hi");
  const std::string probe = get<std::string>(o, "probe");
  const std::size_t rows = get_count(o, "probe_rows");
  const auto index = get<std::int64_t>(o, "dataset");
  if (!(lo < hi)) throw Error(ErrorKind::BadRange, "histogram needs lo < hi");
  if (index >= static_cast<std::int64_t>(specs.size()) || index < -1) {
    bad("dataset index out of range for the suite");
  }
  if (probe != "trained" && probe != "init" && probe != "zero") {
    bad("probe must be trained, init or zero");
  }
  const Activation act = resolve_activation(get<std::string>(o, "activation"));
  if (!act.trainable()) throw Error(ErrorKind::NotTrainable, "activation is forward-only");

  // -1 pools every dataset of the suite, one model per dataset.
  std::vector<DatasetSpec> chosen;
  if (index < 0) {
    chosen = specs;
  } else {
    chosen.push_back(specs[static_cast<std::size_t>(index)]);
  }
  Run run("histogram", o);
  run.record()["seeds"] = {{"root", seed}, {"eval", json::array({seeds.front()})}};
  run.record()["datasets"] = specs_json(chosen);
  run.record()["mlp"] = to_json(mlp);

  std::vector<double> values;
  json per_dataset = json::array();
  for (const auto& spec : chosen) {
    const SampleSet set = realize(spec);
    mlp.input_dim = set.train.inputs.cols();
    if (rows > set.train.inputs.rows()) bad("probe_rows exceeds the training split");
    const std::uint64_t tseed = trial_seed(seeds.front(), spec);
    MlpParams params;
    json info = json::object();
    if (probe == "trained") {
      SeededRng rng(tseed);
      TrainResult t = train(mlp, act, set.train, rng);
      info["train_mse"] = t.report.final_train_mse;
      info["diverged"] = t.report.diverged;
      params = std::move(t.params);
    } else {
      // Same initial weights the trained probe starts from.
      SeededRng init = SeededRng(tseed).substream("init");
      params = init_params(mlp, init);
    }
    const std::size_t din = set.train.inputs.cols();
    Tensor2 x(rows, din, std::vector<double>(rows * din, 0.0));
    if (probe != "zero") {
      auto src = set.train.inputs.data().subspan(0, rows * din);
      x = Tensor2(rows, din, std::vector<double>(src.begin(), src.end()));
    }
    const std::vector<double> v = collect_preactivations(params, act, x);
    values.insert(values.end(), v.begin(), v.end());
    per_dataset.push_back(info);
  }

  // Values outside [lo, hi) land in the edge bins so the counts stay conserved.
  std::vector<std::uint64_t> counts(bins, 0);
  std::size_t below = 0, above = 0, outside_unit = 0;
  for (double v : values) {
    double pos = std::floor((v - lo) * static_cast<double>(bins) / (hi - lo));
    if (!(pos >= 0)) {
      ++below;
      pos = 0;
    } else if (pos >= static_cast<double>(bins)) {
      ++above;
      pos = static_cast<double>(bins - 1);
    }
    if (v < -1.0 || v > 1.0) ++outside_unit;
    ++counts[static_cast<std::size_t>(pos)];
  }
  std::ostringstream csv;
  csv << "bin_left,bin_right,count\n";
  for (std::size_t i = 0; i < bins; ++i) {
    const double l = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    const double r = lo + (hi - lo) * static_cast<double>(i + 1) / static_cast<double>(bins);
    csv << num(l) << "," << num(r) << "," << counts[i] << "\n";
  }
  run.write("histogram.csv", csv.str());
  const double frac = values.empty() ? 0.0 : static_cast<double>(outside_unit) / values.size();
  json extra = {{"datasets", per_dataset}};
  extra.update({{"values", values.size()},
                {"rows", rows},
                {"width", mlp.width},
                {"hidden_layers", mlp.hidden_layers},
                {"clamped_below", below},
                {"clamped_above", above},
                {"fraction_outside_unit", frac}});
  run.record()["results"] = extra;
  if (progress) progress("collected " + std::to_string(values.size()) + " pre-activations");
  std::ostringstream text;
  text << values.size() << " pre-activations (" << rows << " rows x " << mlp.width << " units x "
       << mlp.hidden_layers << " layers x " << chosen.size() << " datasets), " << std::fixed << std::setprecision(1) << 100.0 * frac
       << "% outside [-1, 1], " << below + above << " clamped into edge bins\n";
  return run.finish(text.str());
}

// ---- export ---------------------------------------------------------------

Outcome cmd_export(const json& o, const LineFn& progress) {
  const std::uint64_t seed = get<std::uint64_t>(o, "seed");
  auto specs = resolve_suite(get<std::string>(o, "suite"), seed);
  const auto index = get<std::int64_t>(o, "index");
  std::vector<std::size_t> picks;
  if (index < 0) {
    for (std::size_t i = 0; i < specs.size(); ++i) picks.push_back(i);
  } else if (static_cast<std::size_t>(index) < specs.size()) {
    picks.push_back(static_cast<std::size_t>(index));
  } else {
    bad("dataset index out of range for the suite");
  }
  Run run("export-dataset", o);
  run.record()["seeds"] = {{"root", seed}};
  json datasets = json::array(), res = json::array();
  std::vector<std::vector<std::string>> rows;
  for (auto i : picks) {
    const SampleSet set = realize(specs[i]);
    std::ostringstream csv;
    write_csv(csv, set);
    const std::string name = "dataset_" + std::to_string(i) + ".csv";
    run.write(name, csv.str());
    datasets.push_back(to_json(specs[i]));
    res.push_back({{"index", i}, {"file", name}, {"target", to_json(*set.target)}});
    rows.push_back({std::to_string(i), to_string(specs[i].family()), name});
    if (progress) progress("wrote " + name);
  }
  run.record()["datasets"] = datasets;
  run.record()["results"] = res;
  return run.finish(table({"index", "family", "file"}, rows));
}

// ---- replay ---------------------------------------------------------------

Outcome cmd_replay(const json& o, const LineFn& progress) {
  const std::string path = get<std::string>(o, "record");
  if (path.empty()) bad("replay needs a run record path");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  json rec;
  try {
    rec = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, std::string("run record is not JSON: ") + e.what());
  }
  if (!rec.is_object() || !rec.contains("schema_version") ||
      rec["schema_version"] != kRunRecordSchema) {
    throw Error(ErrorKind::SchemaVersionMismatch,
                "run record schema " +
                    (rec.is_object() && rec.contains("schema_version") ? rec["schema_version"].dump()
                                                                       : std::string("missing")) +
                    ", expected " + std::to_string(kRunRecordSchema));
  }
  const std::string command = rec.at("command").get<std::string>();
  if (command == "replay" || command == "zoo-list") bad("record is not replayable");
  const json& recorded = rec.at("artifacts");

  std::vector<std::string> diffs;
  // Files stored next to the record must still match their recorded hashes.
  const fs::path base = fs::path(path).parent_path();
  for (const auto& [name, hash] : recorded.items()) {
    const fs::path f = base / name;
    if (fs::exists(f) && sha256_file(f.string()) != hash.get<std::string>()) {
      diffs.push_back(name + ": stored file does not match the recorded hash");
    }
  }

  json cfg = rec.at("config");
  cfg["out_dir"] = get<std::string>(o, "out_dir");
  const Outcome again = run_command(command, cfg, progress);
  const json& now = again.record.at("artifacts");
  for (const auto& [name, hash] : recorded.items()) {
    if (!now.contains(name)) {
      diffs.push_back(name + ": not produced by the replay");
    } else if (now[name] != hash) {
      diffs.push_back(name + ": recorded " + hash.get<std::string>().substr(0, 12) +
                      ", replayed " + now[name].get<std::string>().substr(0, 12));
    }
  }
  for (const auto& [name, hash] : now.items())
    if (!recorded.contains(name)) diffs.push_back(name + ": not in the original record");

  if (!diffs.empty()) {
    std::string msg = "replay diverged from " + path + ":";
    for (const auto& d : diffs) msg += "\n  " + d;
    msg += "\nreplayed run: " + again.run_dir;
    throw Error(ErrorKind::HashMismatch, msg);
  }
  std::string text = "replay of " + path + ": " + std::to_string(recorded.size()) +
                     " artifacts identical\n" + again.text;
  return {again.run_dir, text, again.record};
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"eval",           "evolve", "sweep", "histogram",
                                              "export-dataset", "replay", "zoo-list"};
  return names;
}

json normalize_options(const std::string& command, const json& options) {
  json out = command_defaults(command);
  if (options.is_null()) return out;
  if (!options.is_object()) bad("options must be a JSON object");
  for (const auto& [key, value] : options.items()) {
    if (!out.contains(key)) bad("unknown option '" + key + "' for " + command);
    if (!same_type(out[key], value)) bad("option '" + key + "' has the wrong type");
    out[key] = value;
  }
  return out;
}

Outcome run_command(const std::string& command, const json& options, const LineFn& progress) {
  const json o = normalize_options(command, options);
  if (command == "eval") return cmd_eval(o, progress);
  if (command == "evolve") return cmd_evolve(o, progress);
  if (command == "sweep") return cmd_sweep(o, progress);
  if (command == "histogram") return cmd_histogram(o, progress);
  if (command == "export-dataset") return cmd_export(o, progress);
  if (command == "replay") return cmd_replay(o, progress);
  return {"", zoo_list_csv(), json()};
}

std::vector<DatasetSpec> resolve_suite(const std::string& name, std::uint64_t seed) {
  std::string base = name;
  std::optional<std::size_t> limit;
  if (const auto colon = name.find(':'); colon != std::string::npos) {
    base = name.substr(0, colon);
    const std::string n = name.substr(colon + 1);
    if (n.empty() || n.find_first_not_of("0123456789") != std::string::npos || std::stoul(n) == 0) {
      bad("suite limit must be a positive integer");
    }
    limit = std::stoul(n);
  }
  const auto all = default_suite(seed);
  std::vector<DatasetSpec> out;
  if (base == "default") {
    out = all;
  } else if (base == "table1") {
    for (const auto& s : all)
      if (s.family() == Family::Poly1d || s.family() == Family::SinProduct) out.push_back(s);
  } else if (base == "smoke") {
    for (const auto& s : all)
      if (s.family() == Family::Poly1d && out.size() < 4) out.push_back(s);
  } else {
    Family f;
    try {
      f = family_from_string(base);
    } catch (const Error&) {
      bad("unknown suite '" + base + "'");
    }
    for (const auto& s : all)
      if (s.family() == f) out.push_back(s);
  }
  if (limit && *limit < out.size()) out.resize(*limit);
  return out;
}

Activation resolve_activation(const std::string& s) {
  const auto& names = builtin_names();
  if (std::find(names.begin(), names.end(), s) != names.end()) return builtin(s).activation();
  if (!s.empty() && (s.front() == '(' || s == "x")) return Activation::from_expr(parse(s));
  throw Error(ErrorKind::UnknownActivation, "unknown activation '" + s + "'");
}

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd r;
  if (v.empty()) return r;
  double sum = 0.0;
  for (double x : v) sum += x;
  r.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return r;
}

std::string create_run_dir(const std::string& out_dir, const std::string& salt) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + out_dir + ": " + ec.message());
  const auto ns = std::chrono::system_clock::now().time_since_epoch().count();
  const std::string id = sha256_hex(salt + "/" + std::to_string(ns) + "/" + std::to_string(getpid()))
                             .substr(0, 8);
  const fs::path dir = fs::path(out_dir) / (utc_stamp() + "-" + id);
  if (!fs::create_directory(dir, ec)) {
    throw Error(ErrorKind::Io, "run directory " + dir.string() + " already exists or cannot be created" +
                                   (ec ? ": " + ec.message() : ""));
  }
  return dir.string();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace actlab::lab
