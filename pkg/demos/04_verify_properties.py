"""
Checking the operator properties numerically
============================================

The convergence argument rests on a handful of inequalities: a Lipschitz
bound on the threshold, averagedness of the scaled threshold and of the
gradient step, and a majorizer of the cost. ``verify_claims`` probes each of
them with random points and reports the worst value seen.
"""

from proxista.experiments import default_spec, verify_claims

spec = default_spec("sparse-deconv")
bundle = verify_claims(spec)
for r in bundle.reports:
    print(f"{'ok  ' if r.verdict else 'FAIL'} {r.property:32s} worst={r.worst:.3g}")
for k, why in bundle.skipped.items():
    print(f"skip {k}: {why}")

# past the step bound things break, and the suite says so
spec["verify"] = {"alpha_scale": 1.5}
bad = verify_claims(spec)
print("failing at 1.5x the bound:", [r.property for r in bad.reports if not r.verdict])
