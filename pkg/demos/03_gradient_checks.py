"""Verify reverse-mode gradients against central finite differences.

Runs the per-layer checks (tolerance 1e-6) and the composed fused model on a
random bag (tolerance 1e-4), the same checks the `modemil gradcheck` command
and the acceptance suite run.
"""

import time

from modemil.verification import full_model_check, layer_checks

print("per-layer finite-difference checks (limit 1e-6):")
t0 = time.time()
worst_layer = layer_checks(verbose=True)
print(f"worst layer error: {worst_layer:.3e} ({time.time() - t0:.1f} s)\n")

print("composed model forward + cross-entropy on one random bag (limit 1e-4):")
t0 = time.time()
worst_model = full_model_check(verbose=True)
print(f"model error: {worst_model:.3e} ({time.time() - t0:.1f} s)")

ok = worst_layer < 1e-6 and worst_model < 1e-4
print("\nPASS" if ok else "\nFAIL")
