#include "actlab/actlab.h"

#include <exception>
#include <new>
#include <string>

#include "actlab/error.hpp"
#include "actlab/eval.hpp"
#include "actlab/expr.hpp"
#include "actlab/lab.hpp"

struct actlab_expr {
  actlab::Expr expr;
  actlab::CompiledExpr compiled;
  std::string text;
};

struct actlab_outcome {
  std::string text;
  std::string run_dir;
  std::string record;
};

namespace {

thread_local std::string last_error;
thread_local std::int64_t last_position = -1;
thread_local std::string scratch;

actlab_status code(actlab::ErrorKind k) {
  using K = actlab::ErrorKind;
  switch (k) {
    case K::InvalidArgument: return ACTLAB_INVALID_ARGUMENT;
    case K::Syntax: return ACTLAB_SYNTAX_ERROR;
    case K::Arity: return ACTLAB_ARITY_ERROR;
    case K::NonConstExponent: return ACTLAB_NON_CONST_EXPONENT;
    case K::NonFiniteOutput: return ACTLAB_NON_FINITE_OUTPUT;
    case K::ShapeMismatch: return ACTLAB_SHAPE_MISMATCH;
    case K::ShapeTooSmall: return ACTLAB_SHAPE_TOO_SMALL;
    case K::BadRange: return ACTLAB_BAD_RANGE;
    case K::UnknownActivation: return ACTLAB_UNKNOWN_ACTIVATION;
    case K::UnknownEquationId: return ACTLAB_UNKNOWN_EQUATION_ID;
    case K::Domain: return ACTLAB_DOMAIN_ERROR;
    case K::NotTrainable: return ACTLAB_NOT_TRAINABLE;
    case K::SchemaVersionMismatch: return ACTLAB_SCHEMA_VERSION_MISMATCH;
    case K::HashMismatch: return ACTLAB_HASH_MISMATCH;
    case K::Io: return ACTLAB_IO_ERROR;
    case K::ProposerTimeout: return ACTLAB_PROPOSER_TIMEOUT;
    case K::ProposerProtocol: return ACTLAB_PROPOSER_PROTOCOL;
  }
  return ACTLAB_INTERNAL_ERROR;
}

actlab_status fail(actlab_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

// Runs f, translating exceptions into status codes.
template <class F>
actlab_status guard(F&& f) {
  last_error.clear();
  last_position = -1;
  try {
    f();
    return ACTLAB_OK;
  } catch (const actlab::SyntaxError& e) {
    last_position = static_cast<std::int64_t>(e.position());
    return fail(ACTLAB_SYNTAX_ERROR, e.what());
  } catch (const actlab::ArityError& e) {
    last_position = static_cast<std::int64_t>(e.position());
    return fail(ACTLAB_ARITY_ERROR, e.what());
  } catch (const actlab::Error& e) {
    return fail(code(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ACTLAB_INVALID_ARGUMENT, std::string("bad options JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(ACTLAB_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(ACTLAB_INTERNAL_ERROR, e.what());
  }
}

nlohmann::json options_from(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json();
  return nlohmann::json::parse(text);
}

}  // namespace

extern "C" {

const char* actlab_version(void) { return "0.1.0"; }

const char* actlab_status_name(actlab_status s) {
  switch (s) {
    case ACTLAB_OK: return "ok";
    case ACTLAB_INTERNAL_ERROR: return "InternalError";
    default:
      if (s > ACTLAB_OK && s < ACTLAB_INTERNAL_ERROR) {
        return actlab::to_string(static_cast<actlab::ErrorKind>(s - 1));
      }
      return "unknown";
  }
}

const char* actlab_last_error(void) { return last_error.c_str(); }

int64_t actlab_last_error_position(void) { return last_position; }

actlab_status actlab_expr_parse(const char* text, actlab_expr** out) {
  if (text == nullptr || out == nullptr) return fail(ACTLAB_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guard([&] {
    actlab::Expr e = actlab::parse(text);
    actlab::CompiledExpr c(e);
    std::string printed = actlab::print(e);
    *out = new actlab_expr{std::move(e), std::move(c), std::move(printed)};
  });
}

void actlab_expr_free(actlab_expr* expr) { delete expr; }

const char* actlab_expr_text(const actlab_expr* expr) { return expr ? expr->text.c_str() : ""; }

actlab_status actlab_expr_cost(const actlab_expr* expr, uint64_t* out) {
  if (expr == nullptr || out == nullptr) return fail(ACTLAB_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = actlab::cost(expr->expr); });
}

actlab_status actlab_expr_depth(const actlab_expr* expr, size_t* out) {
  if (expr == nullptr || out == nullptr) return fail(ACTLAB_INVALID_ARGUMENT, "null argument");
  return guard([&] { *out = expr->expr.depth(); });
}

actlab_status actlab_expr_eval(const actlab_expr* expr, const double* x, size_t rows, size_t cols,
                               double* y) {
  if (expr == nullptr || (rows * cols > 0 && (x == nullptr || y == nullptr))) {
    return fail(ACTLAB_INVALID_ARGUMENT, "null argument");
  }
  return guard([&] {
    const actlab::Tensor2 in(rows, cols, std::vector<double>(x, x + rows * cols));
    const actlab::Tensor2 result = expr->compiled.forward(in);
    std::copy(result.data().begin(), result.data().end(), y);
  });
}

actlab_status actlab_run(const char* command, const char* options_json, actlab_line_fn progress,
                         void* user, actlab_outcome** out) {
  if (command == nullptr || out == nullptr) return fail(ACTLAB_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guard([&] {
    actlab::lab::LineFn fn;
    if (progress) fn = [&](const std::string& line) { progress(line.c_str(), user); };
    actlab::lab::Outcome r = actlab::lab::run_command(command, options_from(options_json), fn);
    *out = new actlab_outcome{std::move(r.text), std::move(r.run_dir), r.record.dump(2)};
  });
}

void actlab_outcome_free(actlab_outcome* outcome) { delete outcome; }

const char* actlab_outcome_text(const actlab_outcome* o) { return o ? o->text.c_str() : ""; }

const char* actlab_outcome_run_dir(const actlab_outcome* o) { return o ? o->run_dir.c_str() : ""; }

const char* actlab_outcome_record(const actlab_outcome* o) { return o ? o->record.c_str() : "null"; }

actlab_status actlab_normalize_options(const char* command, const char* options_json,
                                       const char** out) {
  if (command == nullptr || out == nullptr) return fail(ACTLAB_INVALID_ARGUMENT, "null argument");
  return guard([&] {
    scratch = actlab::lab::normalize_options(command, options_from(options_json)).dump();
    *out = scratch.c_str();
  });
}

}  // extern "C"
