#include "bsdp.h"
#include <stdio.h>
int main(void){
  BsdpProblem *p; BsdpResult *r; BsdpParams par; double obj;
  bsdp_params_default(&par); par.printlevel = 0;
  if (bsdp_problem_generate("theta:cycle,5", &p) != BSDP_STATUS_OK) return 1;
  if (bsdp_solve(p, &par, &r) != BSDP_STATUS_OK) { puts(bsdp_last_error()); return 1; }
  bsdp_result_source_objective(r, &obj); printf("%s %.8f\n", bsdp_version(), obj);
  bsdp_result_free(r); bsdp_problem_free(p); return 0; }
