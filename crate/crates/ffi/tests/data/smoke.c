/* Links against the generated header and the shared library, runs the
 * pipeline on a Bell pair, and checks the certified value end to end. */

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "hardy_forge.h"

static const char *BELL =
    "{\"dims\":[2,2],\"amplitudes\":[[0.7071067811865476,0.0],[0.0,0.0],"
    "[0.0,0.0],[0.7071067811865476,0.0]]}";

static int fail(const char *what) {
  const char *err = hf_last_error();
  fprintf(stderr, "%s: %s\n", what, err ? err : "(no message)");
  return 1;
}

int main(void) {
  if (!hf_version() || strlen(hf_version()) == 0) return fail("version");

  HfState *state = NULL;
  if (hf_state_parse_json(BELL, &state) != HF_STATUS_OK) return fail("parse");

  HfCertificate *cert = NULL;
  if (hf_certify(state, 5, false, &cert) != HF_STATUS_OK) return fail("certify");

  double value = hf_certificate_value(cert);
  if (fabs(value - 0.125) > 1e-9) {
    fprintf(stderr, "value %.17g, expected 0.125\n", value);
    return 1;
  }
  if (!hf_certificate_passed(cert)) return fail("passed");
  if (strcmp(hf_certificate_scenario(cert), "bell") != 0) return fail("scenario");

  char *json = NULL;
  if (hf_certificate_to_json(cert, &json) != HF_STATUS_OK) return fail("to_json");
  if (strstr(json, "\"hash\"") == NULL) {
    fprintf(stderr, "certificate JSON has no hash field\n");
    return 1;
  }
  hf_string_free(json);

  int64_t maximum = -1;
  uint64_t witnesses = 0;
  if (hf_classical_max(2, &maximum, &witnesses) != HF_STATUS_OK)
    return fail("classical");
  if (maximum != 0 || witnesses == 0) {
    fprintf(stderr, "classical maximum %lld with %llu witnesses\n",
            (long long)maximum, (unsigned long long)witnesses);
    return 1;
  }

  hf_certificate_free(cert);
  hf_state_free(state);
  puts("ok");
  return 0;
}
