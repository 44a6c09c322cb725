/* Compiled as C: the public header must not need a C++ compiler. */
#include "actlab/actlab.h"

int actlab_c_header_check(void) {
  actlab_expr* e = 0;
  uint64_t flops = 0;
  if (actlab_expr_parse("(gelu x)", &e) != ACTLAB_OK) return 1;
  if (actlab_expr_cost(e, &flops) != ACTLAB_OK || flops != 8) return 2;
  actlab_expr_free(e);
  return 0;
}
