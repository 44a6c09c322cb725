#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "actlab/datagen.hpp"
#include "actlab/expr.hpp"
#include "actlab/mlp.hpp"
#include "actlab/rng.hpp"

namespace actlab {

enum class CandidateStatus { Pending, Scored, RejectedBudget, Failed };

const char* to_string(CandidateStatus s) noexcept;

struct Candidate {
  std::uint64_t id = 0;
  std::string expr_text;      // as proposed; may not parse for failed candidates
  std::optional<Expr> expr;   // present when expr_text parsed
  double fitness = 0.0;       // meaningful when scored
  std::uint64_t flop_cost = 0;
  std::vector<std::uint64_t> parent_ids;
  std::size_t generation = 0;
  std::uint64_t eval_seed = 0;
  CandidateStatus status = CandidateStatus::Pending;
  std::string error;          // why a candidate failed
};

/// Append-only log plus a top-K view of scored candidates, ordered by
/// fitness (higher first), then lower FLOP cost, then lower id.
class CandidateDb {
 public:
  explicit CandidateDb(std::size_t top_k = 16);

  /// Assigns the next id and returns the stored candidate. Throws
  /// InvalidArgument for a scored candidate with non-finite fitness.
  const Candidate& add(Candidate c);

  const std::vector<Candidate>& log() const noexcept { return log_; }
  const Candidate& at(std::uint64_t id) const;
  /// Ids of the current top-K.
  const std::vector<std::uint64_t>& top() const noexcept { return top_; }
  std::size_t top_k() const noexcept { return k_; }
  /// Best scored candidate, if any.
  const Candidate* best() const noexcept;

 private:
  bool better(const Candidate& a, const Candidate& b) const noexcept;

  std::size_t k_;
  std::vector<Candidate> log_;
  std::vector<std::uint64_t> top_;
};

enum class MutatorKind { Grammar, External };

struct ProposerSettings {
  std::string command;  // executable path, run without a shell
  std::chrono::milliseconds timeout{60000};
  std::string instruction;  // defaults to default_instruction()
};

struct EvolveConfig {
  std::size_t generations = 200;
  std::size_t proposals_per_generation = 8;
  std::size_t parents_per_prompt = 2;
  std::size_t top_k = 16;
  FlopBudget budget;
  std::vector<DatasetSpec> datasets;
  std::vector<std::uint64_t> eval_seeds{0, 1, 2};
  MutatorKind mutator = MutatorKind::Grammar;
  bool allow_batch_stats = true;
  std::size_t max_depth = 12;
  MlpConfig mlp;
  std::uint64_t seed = 0;  // selection and mutation stream
  ProposerSettings proposer;

  void validate() const;
};

/// The meta-prompt sent to external proposers.
const std::string& default_instruction();
/// Grammar summary sent to external proposers.
std::string grammar_reference(const CostModel& model = CostModel::default_model());

// ---- mutation ------------------------------------------------------------

struct MutateOptions {
  std::size_t max_depth = 12;
  bool allow_batch_stats = true;
  int max_attempts = 20;
};

enum class MutationKind { PointOp, ConstPerturb, InsertWrapper, DeleteNode, Crossover };

/// Applies one mutation of a randomly chosen kind (probabilities 0.25, 0.25,
/// 0.2, 0.15, 0.15). Invalid results are retried; after max_attempts the
/// first parent is returned unchanged.
Expr grammar_mutate(const std::vector<Expr>& parents, SeededRng& rng,
                    const MutateOptions& opts = {});

/// A single mutation of the given kind, or nothing if it does not apply or
/// produces an invalid tree.
std::optional<Expr> mutate_once(MutationKind kind, const std::vector<Expr>& parents,
                                SeededRng& rng, const MutateOptions& opts = {});

// ---- external proposer ---------------------------------------------------

struct ParentRecord {
  std::string expr_text;
  double fitness = 0.0;
  std::uint64_t flop_cost = 0;
  bool operator==(const ParentRecord&) const = default;
};

struct ProposalRequest {
  int protocol_version = 1;
  std::string instruction;
  std::vector<ParentRecord> parents;
  std::uint64_t budget = 64;
  std::string grammar_reference;
  bool operator==(const ProposalRequest&) const = default;
};

struct ProposalResponse {
  std::optional<std::string> expr_text;
  std::optional<std::string> error;
  bool operator==(const ProposalResponse&) const = default;
};

inline constexpr int kProtocolVersion = 1;

/// One JSON object per line, without the trailing newline.
std::string encode_request(const ProposalRequest& r);
ProposalRequest decode_request(const std::string& line);
std::string encode_response(const ProposalResponse& r);
/// Throws ProposerProtocol unless the line is an object with exactly one of
/// a string "expr_text" or a string "error".
ProposalResponse decode_response(const std::string& line);

class Proposer {
 public:
  virtual ~Proposer() = default;
  virtual ProposalResponse propose(const ProposalRequest& request) = 0;
};

/// Runs the proposer executable as a child process and talks to it over its
/// standard streams, one request line and one response line at a time.
/// The child is started lazily and restarted if it exits.
class ProcessProposer final : public Proposer {
 public:
  ProcessProposer(std::string command, std::chrono::milliseconds timeout);
  ~ProcessProposer() override;
  ProcessProposer(const ProcessProposer&) = delete;
  ProcessProposer& operator=(const ProcessProposer&) = delete;

  /// Throws ProposerTimeout or ProposerProtocol.
  ProposalResponse propose(const ProposalRequest& request) override;

 private:
  void start();
  void stop() noexcept;

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// ---- scoring and the loop ------------------------------------------------

/// Realizes the configured datasets once and scores expressions on them.
class Scorer {
 public:
  explicit Scorer(const EvolveConfig& cfg);

  /// Negative mean OOD MSE over datasets x evaluation seeds. Diverging
  /// trials count as kDivergedMse.
  double score(const Expr& expr) const;

 private:
  const EvolveConfig& cfg_;
  std::vector<SampleSet> sets_;
};

double score(const Expr& expr, const EvolveConfig& cfg);

/// Database holding only the scored ReLU seed.
CandidateDb seed_db(const EvolveConfig& cfg);

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  std::string best_expr;
  std::size_t proposed = 0;
  std::size_t scored = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
  double wall_seconds = 0.0;
};

using ProgressFn = std::function<void(const GenerationRecord&)>;

struct EvolveResult {
  CandidateDb db;
  std::vector<GenerationRecord> generations;
};

/// The search loop. `proposer` is required when cfg.mutator is External.
EvolveResult run(const EvolveConfig& cfg, CandidateDb db, Proposer* proposer = nullptr,
                 const ProgressFn& progress = {});

}  // namespace actlab
