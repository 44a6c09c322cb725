#include "actlab/evolve.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <json.hpp>

#include "actlab/error.hpp"
#include "actlab/trial.hpp"

namespace actlab {

using nlohmann::json;

const char* to_string(CandidateStatus s) noexcept {
  switch (s) {
    case CandidateStatus::Pending: return "pending";
    case CandidateStatus::Scored: return "scored";
    case CandidateStatus::RejectedBudget: return "rejected-budget";
    case CandidateStatus::Failed: return "failed";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// CandidateDb

CandidateDb::CandidateDb(std::size_t top_k) : k_(top_k) {
  if (k_ == 0) throw Error(ErrorKind::InvalidArgument, "top-K size must be positive");
}

bool CandidateDb::better(const Candidate& a, const Candidate& b) const noexcept {
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  if (a.flop_cost != b.flop_cost) return a.flop_cost < b.flop_cost;
  return a.id < b.id;
}

const Candidate& CandidateDb::add(Candidate c) {
  if (c.status == CandidateStatus::Scored && !std::isfinite(c.fitness)) {
    throw Error(ErrorKind::InvalidArgument, "scored candidate needs finite fitness");
  }
  c.id = log_.size();
  log_.push_back(std::move(c));
  const Candidate& stored = log_.back();
  if (stored.status == CandidateStatus::Scored) {
    auto pos = std::find_if(top_.begin(), top_.end(),
                            [&](std::uint64_t id) { return better(stored, log_[id]); });
    top_.insert(pos, stored.id);
    if (top_.size() > k_) top_.pop_back();
  }
  return stored;
}

const Candidate& CandidateDb::at(std::uint64_t id) const {
  if (id >= log_.size()) throw Error(ErrorKind::InvalidArgument, "no candidate " + std::to_string(id));
  return log_[id];
}

const Candidate* CandidateDb::best() const noexcept {
  return top_.empty() ? nullptr : &log_[top_.front()];
}

// ---------------------------------------------------------------------------
// config

void EvolveConfig::validate() const {
  if (proposals_per_generation == 0 || parents_per_prompt == 0 || top_k == 0 ||
      max_depth == 0) {
    throw Error(ErrorKind::InvalidArgument, "evolution counts must be at least 1");
  }
  if (datasets.empty()) throw Error(ErrorKind::InvalidArgument, "no fitness datasets");
  if (eval_seeds.empty()) throw Error(ErrorKind::InvalidArgument, "no evaluation seeds");
  for (const auto& d : datasets) d.validate();
  mlp.validate();
}

const std::string& default_instruction() {
  static const std::string text =
      "Act as a Senior Machine Learning Researcher specializing in model robustness and OOD "
      "(Out-of-Distribution) generalization.\n"
      "Your task is to iteratively improve the OOD Evaluation Metric by modifying the "
      "activation functions in the provided code, where larger values are better.\n"
      "Theoretical Justification: For each proposal, explicitly explain why it mathematically "
      "supports OOD generalization better than the baseline.";
  return text;
}

std::string grammar_reference(const CostModel& model) {
  std::string out =
      "expr := x | number | (op expr...)\n"
      "pow needs a numeric literal exponent; batch-mean and batch-std reduce over the whole "
      "tensor and broadcast the result.\n"
      "operators (arity, flops per element):\n";
  auto list = [&](std::span<const Op> ops) {
    for (Op op : ops) {
      const auto& info = op_info(op);
      out += "  " + std::string(info.name) + " " + std::to_string(info.arity) + " " +
             std::to_string(model.cost(op)) + "\n";
    }
  };
  list(unary_ops());
  list(binary_ops());
  list(batch_stat_ops());
  return out;
}

// ---------------------------------------------------------------------------
// mutation

namespace {

void collect(const Expr& e, std::vector<Expr>& out) {
  out.push_back(e);
  for (const auto& c : e.children()) collect(c, out);
}

std::vector<Expr> preorder(const Expr& e) {
  std::vector<Expr> out;
  out.reserve(e.node_count());
  collect(e, out);
  return out;
}

// Rebuilds `e` with its preorder node `target` replaced by `sub`.
Expr replace_at(const Expr& e, std::size_t target, const Expr& sub, std::size_t& counter) {
  if (counter == target) {
    counter += e.node_count();
    return sub;
  }
  ++counter;
  if (e.is_leaf()) return e;
  std::vector<Expr> kids;
  bool changed = false;
  for (const auto& c : e.children()) {
    const std::size_t before = counter;
    if (target >= before && target < before + c.node_count()) {
      kids.push_back(replace_at(c, target, sub, counter));
      changed = true;
    } else {
      kids.push_back(c);
      counter += c.node_count();
    }
  }
  return changed ? Expr::make(e.op(), std::move(kids), e.value()) : e;
}

Expr replace_at(const Expr& e, std::size_t target, const Expr& sub) {
  std::size_t counter = 0;
  return replace_at(e, target, sub, counter);
}

template <class T>
const T& pick(std::span<const T> items, SeededRng& rng) {
  return items[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(items.size()) - 1))];
}

std::size_t pick_index(std::size_t n, SeededRng& rng) {
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
}

std::optional<Expr> point_op(const Expr& parent, SeededRng& rng) {
  const auto nodes = preorder(parent);
  std::vector<std::size_t> internal;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!nodes[i].is_leaf()) internal.push_back(i);
  if (internal.empty()) return std::nullopt;
  const std::size_t at = internal[pick_index(internal.size(), rng)];
  const Expr& node = nodes[at];
  const OpClass cls = op_info(node.op()).op_class;
  std::span<const Op> pool = cls == OpClass::Unary    ? unary_ops()
                             : cls == OpClass::Binary ? binary_ops()
                                                      : batch_stat_ops();
  std::vector<Op> options;
  for (Op op : pool)
    if (op != node.op()) options.push_back(op);
  const Op op = options[pick_index(options.size(), rng)];
  std::vector<Expr> kids(node.children().begin(), node.children().end());
  return replace_at(parent, at, Expr::make(op, std::move(kids)));
}

std::optional<Expr> const_perturb(const Expr& parent, SeededRng& rng) {
  const auto nodes = preorder(parent);
  std::vector<std::size_t> consts;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].op() == Op::Const) consts.push_back(i);
  if (consts.empty()) return std::nullopt;
  const std::size_t at = consts[pick_index(consts.size(), rng)];
  const double v = nodes[at].value() * std::exp(rng.normal(0.0, 0.3));
  if (!std::isfinite(v)) return std::nullopt;
  return replace_at(parent, at, Expr::constant(v));
}

Expr random_leaf(SeededRng& rng) {
  if (rng.uniform01() < 0.5) return Expr::input();
  // Short literals keep printed candidates readable.
  const double v = std::round(rng.normal(0.0, 1.0) * 100.0) / 100.0;
  return Expr::constant(v == 0.0 ? 0.1 : v);
}

std::optional<Expr> insert_wrapper(const Expr& parent, SeededRng& rng, const MutateOptions& opts) {
  const auto nodes = preorder(parent);
  const std::size_t at = pick_index(nodes.size(), rng);
  const Expr& node = nodes[at];
  Expr wrapped = node;
  if (rng.uniform01() < 0.5) {
    std::vector<Op> pool(unary_ops().begin(), unary_ops().end());
    if (opts.allow_batch_stats) pool.insert(pool.end(), batch_stat_ops().begin(), batch_stat_ops().end());
    wrapped = Expr::make(pool[pick_index(pool.size(), rng)], {node});
  } else {
    const Op op = pick(binary_ops(), rng);
    if (op == Op::Pow) {
      wrapped = Expr::binary(op, node, Expr::constant(rng.uniform01() < 0.5 ? 2.0 : 3.0));
    } else if (rng.uniform01() < 0.5) {
      wrapped = Expr::binary(op, node, random_leaf(rng));
    } else {
      wrapped = Expr::binary(op, random_leaf(rng), node);
    }
  }
  return replace_at(parent, at, wrapped);
}

std::optional<Expr> delete_node(const Expr& parent, SeededRng& rng) {
  const auto nodes = preorder(parent);
  std::vector<std::size_t> internal;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!nodes[i].is_leaf()) internal.push_back(i);
  if (internal.empty()) return std::nullopt;
  const std::size_t at = internal[pick_index(internal.size(), rng)];
  const auto kids = nodes[at].children();
  return replace_at(parent, at, kids[pick_index(kids.size(), rng)]);
}

std::optional<Expr> crossover(const std::vector<Expr>& parents, SeededRng& rng) {
  const Expr& a = parents[0];
  const Expr& b = parents.size() > 1 ? parents[1] : parents[0];
  const auto donor = preorder(b);
  const std::size_t at = pick_index(a.node_count(), rng);
  return replace_at(a, at, donor[pick_index(donor.size(), rng)]);
}

}  // namespace

std::optional<Expr> mutate_once(MutationKind kind, const std::vector<Expr>& parents,
                                SeededRng& rng, const MutateOptions& opts) {
  if (parents.empty()) throw Error(ErrorKind::InvalidArgument, "mutation needs a parent");
  std::optional<Expr> out;
  try {
    switch (kind) {
      case MutationKind::PointOp: out = point_op(parents[0], rng); break;
      case MutationKind::ConstPerturb: out = const_perturb(parents[0], rng); break;
      case MutationKind::InsertWrapper: out = insert_wrapper(parents[0], rng, opts); break;
      case MutationKind::DeleteNode: out = delete_node(parents[0], rng); break;
      case MutationKind::Crossover: out = crossover(parents, rng); break;
    }
  } catch (const Error&) {
    return std::nullopt;  // e.g. pow ended up with a non-literal exponent
  }
  if (!out) return std::nullopt;
  if (out->depth() > opts.max_depth) return std::nullopt;
  if (!opts.allow_batch_stats && out->uses_batch_stats()) return std::nullopt;
  return out;
}

Expr grammar_mutate(const std::vector<Expr>& parents, SeededRng& rng, const MutateOptions& opts) {
  if (parents.empty()) throw Error(ErrorKind::InvalidArgument, "mutation needs a parent");
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const double u = rng.uniform01();
    const MutationKind kind = u < 0.25   ? MutationKind::PointOp
                              : u < 0.50 ? MutationKind::ConstPerturb
                              : u < 0.70 ? MutationKind::InsertWrapper
                              : u < 0.85 ? MutationKind::DeleteNode
                                         : MutationKind::Crossover;
    if (auto e = mutate_once(kind, parents, rng, opts)) return *e;
  }
  return parents[0];
}

// ---------------------------------------------------------------------------
// wire format

namespace {

[[noreturn]] void protocol_error(const std::string& what) {
  throw Error(ErrorKind::ProposerProtocol, what);
}

json parse_object(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    protocol_error(std::string("malformed JSON record: ") + e.what());
  }
  if (!j.is_object()) protocol_error("record is not a JSON object");
  return j;
}

}  // namespace

std::string encode_request(const ProposalRequest& r) {
  json parents = json::array();
  for (const auto& p : r.parents) {
    parents.push_back({{"expr_text", p.expr_text}, {"fitness", p.fitness}, {"flop_cost", p.flop_cost}});
  }
  const json j = {{"protocol_version", r.protocol_version},
                  {"instruction", r.instruction},
                  {"parents", parents},
                  {"budget", r.budget},
                  {"grammar_reference", r.grammar_reference}};
  return j.dump();
}

ProposalRequest decode_request(const std::string& line) {
  const json j = parse_object(line);
  try {
    ProposalRequest r;
    r.protocol_version = j.at("protocol_version").get<int>();
    r.instruction = j.at("instruction").get<std::string>();
    for (const auto& p : j.at("parents")) {
      r.parents.push_back({p.at("expr_text").get<std::string>(), p.at("fitness").get<double>(),
                           p.at("flop_cost").get<std::uint64_t>()});
    }
    r.budget = j.at("budget").get<std::uint64_t>();
    r.grammar_reference = j.at("grammar_reference").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    protocol_error(std::string("bad request record: ") + e.what());
  }
}

std::string encode_response(const ProposalResponse& r) {
  json j = json::object();
  if (r.expr_text) j["expr_text"] = *r.expr_text;
  if (r.error) j["error"] = *r.error;
  return j.dump();
}

ProposalResponse decode_response(const std::string& line) {
  const json j = parse_object(line);
  const bool has_expr = j.contains("expr_text");
  const bool has_error = j.contains("error");
  if (has_expr == has_error) protocol_error("response needs exactly one of expr_text or error");
  const json& v = has_expr ? j["expr_text"] : j["error"];
  if (!v.is_string()) protocol_error("response field must be a string");
  ProposalResponse r;
  (has_expr ? r.expr_text : r.error) = v.get<std::string>();
  return r;
}

// ---------------------------------------------------------------------------
// child process

ProcessProposer::ProcessProposer(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  if (command_.empty()) throw Error(ErrorKind::InvalidArgument, "empty proposer command");
}

ProcessProposer::~ProcessProposer() { stop(); }

void ProcessProposer::start() {
  // A socket pair instead of pipes so writes to a dead child can use
  // MSG_NOSIGNAL rather than raising SIGPIPE.
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw Error(ErrorKind::Io, std::string("socketpair: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw Error(ErrorKind::Io, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    dup2(fds[1], STDIN_FILENO);
    dup2(fds[1], STDOUT_FILENO);
    execl(command_.c_str(), command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  pid_ = pid;
  to_child_ = fds[0];
  from_child_ = fds[0];
  buffer_.clear();
}

void ProcessProposer::stop() noexcept {
  if (to_child_ >= 0) close(to_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

ProposalResponse ProcessProposer::propose(const ProposalRequest& request) {
  if (pid_ < 0) start();
  const std::string line = encode_request(request) + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = send(to_child_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      stop();
      protocol_error("proposer is not accepting requests");
    }
    sent += static_cast<std::size_t>(n);
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      const std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return decode_response(reply);
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      stop();
      throw Error(ErrorKind::ProposerTimeout, "proposer did not answer within " +
                                                  std::to_string(timeout_.count()) + " ms");
    }
    pollfd p{from_child_, POLLIN, 0};
    const int ready = poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      stop();
      throw Error(ErrorKind::Io, std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      stop();
      protocol_error("proposer closed its output");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// ---------------------------------------------------------------------------
// scoring

Scorer::Scorer(const EvolveConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  for (const auto& spec : cfg.datasets) sets_.push_back(realize(spec));
}

double Scorer::score(const Expr& expr) const {
  const Activation act = Activation::from_expr(expr);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    for (std::uint64_t s : cfg_.eval_seeds) {
      total += run_trial(act, sets_[i], cfg_.mlp, trial_seed(s, cfg_.datasets[i])).ood_mse;
      ++count;
    }
  }
  return -(total / static_cast<double>(count));
}

double score(const Expr& expr, const EvolveConfig& cfg) { return Scorer(cfg).score(expr); }

namespace {

Candidate seed_candidate(const Scorer& scorer, const EvolveConfig& cfg) {
  Candidate c;
  c.expr = parse("(relu x)");
  c.expr_text = print(*c.expr);
  c.flop_cost = cost(*c.expr);
  c.eval_seed = cfg.eval_seeds.front();
  c.fitness = scorer.score(*c.expr);
  c.status = CandidateStatus::Scored;
  return c;
}

// Top-K as it stood when a generation started; every proposal of the
// generation samples parents from it.
struct Pool {
  std::vector<std::uint64_t> ids;
  std::vector<double> cumulative;
};

Pool selection_pool(const CandidateDb& db) {
  const auto& top = db.top();
  if (top.empty()) throw Error(ErrorKind::InvalidArgument, "database has no scored candidate");
  const double best = db.at(top.front()).fitness;
  const double scale = std::max(std::abs(best), 1e-12);  // temperature 1 on relative fitness
  Pool pool{top, {}};
  double sum = 0.0;
  for (std::uint64_t id : top) {
    sum += std::exp((db.at(id).fitness - best) / scale);
    pool.cumulative.push_back(sum);
  }
  return pool;
}

std::vector<std::uint64_t> select_parents(const Pool& pool, std::size_t count, SeededRng& rng) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double u = rng.uniform01() * pool.cumulative.back();
    std::size_t k = 0;
    while (k + 1 < pool.cumulative.size() && u >= pool.cumulative[k]) ++k;
    out.push_back(pool.ids[k]);
  }
  return out;
}

}  // namespace

CandidateDb seed_db(const EvolveConfig& cfg) {
  const Scorer scorer(cfg);
  CandidateDb db(cfg.top_k);
  db.add(seed_candidate(scorer, cfg));
  return db;
}

EvolveResult run(const EvolveConfig& cfg, CandidateDb db, Proposer* proposer,
                 const ProgressFn& progress) {
  cfg.validate();
  if (cfg.mutator == MutatorKind::External && proposer == nullptr) {
    throw Error(ErrorKind::InvalidArgument, "external mutator needs a proposer");
  }
  const Scorer scorer(cfg);
  SeededRng rng = SeededRng(cfg.seed).substream("evolve");
  const MutateOptions opts{cfg.max_depth, cfg.allow_batch_stats, 20};
  const std::string grammar = grammar_reference();
  const std::string& instruction =
      cfg.proposer.instruction.empty() ? default_instruction() : cfg.proposer.instruction;

  // Fitness is a pure function of the expression, so repeats are looked up.
  std::map<std::string, double> memo;
  for (const auto& c : db.log())
    if (c.status == CandidateStatus::Scored) memo.emplace(c.expr_text, c.fitness);

  EvolveResult result{std::move(db), {}};
  CandidateDb& d = result.db;
  int consecutive_timeouts = 0;

  for (std::size_t g = 1; g <= cfg.generations; ++g) {
    const auto start = std::chrono::steady_clock::now();
    GenerationRecord rec;
    rec.generation = g;
    const Pool pool = selection_pool(d);
    for (std::size_t p = 0; p < cfg.proposals_per_generation; ++p) {
      Candidate c;
      c.generation = g;
      c.eval_seed = cfg.eval_seeds.front();
      c.parent_ids = select_parents(pool, cfg.parents_per_prompt, rng);

      if (cfg.mutator == MutatorKind::Grammar) {
        std::vector<Expr> parents;
        for (auto id : c.parent_ids) parents.push_back(*d.at(id).expr);
        c.expr = grammar_mutate(parents, rng, opts);
        c.expr_text = print(*c.expr);
      } else {
        ProposalRequest req;
        req.instruction = instruction;
        req.budget = cfg.budget.max_flops_per_element;
        req.grammar_reference = grammar;
        for (auto id : c.parent_ids) {
          const Candidate& par = d.at(id);
          req.parents.push_back({par.expr_text, par.fitness, par.flop_cost});
        }
        try {
          const ProposalResponse resp = proposer->propose(req);
          consecutive_timeouts = 0;
          if (resp.error) {
            c.status = CandidateStatus::Failed;
            c.error = "proposer error: " + *resp.error;
          } else {
            c.expr_text = *resp.expr_text;
          }
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::ProposerTimeout && ++consecutive_timeouts >= 3) throw;
          if (e.kind() != ErrorKind::ProposerTimeout && e.kind() != ErrorKind::ProposerProtocol) throw;
          c.status = CandidateStatus::Failed;
          c.error = e.what();
        }
        if (c.status != CandidateStatus::Failed) {
          try {
            c.expr = parse(c.expr_text);
          } catch (const Error& e) {
            c.status = CandidateStatus::Failed;
            c.error = e.what();
          }
        }
      }

      if (c.expr) {
        c.flop_cost = cost(*c.expr);
        if (c.flop_cost > cfg.budget.max_flops_per_element) {
          c.status = CandidateStatus::RejectedBudget;
        } else if (!cfg.allow_batch_stats && c.expr->uses_batch_stats()) {
          c.status = CandidateStatus::Failed;
          c.error = "batch statistics are disabled";
        } else {
          const std::string key = print(*c.expr);
          auto it = memo.find(key);
          try {
            if (it == memo.end()) it = memo.emplace(key, scorer.score(*c.expr)).first;
            c.fitness = it->second;
            c.status = CandidateStatus::Scored;
          } catch (const Error& e) {
            c.status = CandidateStatus::Failed;
            c.error = e.what();
          }
        }
      }

      ++rec.proposed;
      switch (c.status) {
        case CandidateStatus::Scored: ++rec.scored; break;
        case CandidateStatus::RejectedBudget: ++rec.rejected; break;
        default: ++rec.failed; break;
      }
      d.add(std::move(c));
    }
    const Candidate* best = d.best();
    rec.best_fitness = best->fitness;
    rec.best_expr = best->expr_text;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (progress) progress(rec);
    result.generations.push_back(std::move(rec));
  }
  return result;
}

}  // namespace actlab
