#include <stdio.h>
#include "flisr.h"
int main(void) {
  FlisrTopology *t = NULL; FlisrResult *r = NULL;
  if (flisr_topology_fixture("waterford", &t) != FLISR_STATUS_OK) return 1;
  const char *c = "{\"site\":\"waterford\",\"faulted\":[\"S513\"],\"down\":[\"S512\",\"S716\",\"S514\",\"S700\"]}";
  if (flisr_run_scenario(t, c, &r) != FLISR_STATUS_OK) { puts(flisr_last_error()); return 2; }
  printf("%s | %u -> %u | %llu\n", flisr_result_operations(r), flisr_result_affected_pre(r), flisr_result_affected_post(r), (unsigned long long)flisr_result_cml_pre(r));
  flisr_result_free(r); flisr_topology_free(t); return 0;
}
