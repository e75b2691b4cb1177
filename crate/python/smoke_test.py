#!/usr/bin/env python3
"""Smoke test for the rdp_py extension module.

Builds the cdylib with cargo if needed, loads it, and checks a handful of
known values end to end. Exits non-zero on any failure.

Usage: python3 python/smoke_test.py [--release]
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_and_import(profile: str):
    args = ["cargo", "build", "-p", "rdp-py"]
    if profile == "release":
        args.append("--release")
    subprocess.run(args, cwd=ROOT, check=True)
    built = ROOT / "target" / profile / "librdp_py.so"
    if not built.exists():  # macOS fallback
        built = ROOT / "target" / profile / "librdp_py.dylib"
    staging = Path(tempfile.mkdtemp(prefix="rdp_py_"))
    shutil.copy(built, staging / "rdp_py.so")
    sys.path.insert(0, str(staging))
    import rdp_py

    return rdp_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    profile = "release" if "--release" in sys.argv[1:] else "debug"
    rdp = build_and_import(profile)

    gamma_spec = rdp.Spec.from_json(
        '{"terms":[{"coef":1.0,"family":{"gamma":{"k":2.0,"theta":0.5}}}]}'
    )

    # MGF values and the divergence sentinel
    approx(gamma_spec.mgf(0.0), 1.0, 0.0)
    approx(gamma_spec.mgf(-1.0), 1.5 ** -2, 1e-12)
    assert math.isinf(gamma_spec.mgf(3.0)), "MGF past 1/theta must be +inf"
    approx(gamma_spec.mgf_deriv(-1.0), 2.0 * 0.5 * 1.5 ** -3, 1e-12)
    approx(gamma_spec.mean_inv_b(), 1.0, 1e-12)

    # privacy: closed-form guarantee and the necessary condition
    approx(gamma_spec.eps(1.0), 3.0 * math.log(1.5), 1e-12)
    holds, margin = gamma_spec.necessary_condition(1.0)
    assert holds and abs(margin - 0.625) < 1e-9

    # utility
    approx(gamma_spec.usefulness(1.0), 1.0 - 1.5 ** -2, 1e-12)
    approx(gamma_spec.pdf(0.0), 0.5 * gamma_spec.mean_inv_b(), 1e-12)
    approx(gamma_spec.cdf(0.0), 0.5, 1e-12)
    approx(gamma_spec.l1(), 2.0, 1e-7)
    assert gamma_spec.l2() is None, "l2 diverges for shape k = 2"
    table, full = gamma_spec.entropy()
    approx(full - table, math.log(2.0), 1e-12)

    # JSON round trip and repr
    round_tripped = rdp.Spec.from_json(gamma_spec.to_json())
    assert round_tripped.to_json() == gamma_spec.to_json()
    assert "gamma" in repr(gamma_spec)

    # sampling: deterministic under a seed, strictly positive
    a = gamma_spec.sample(7, 1000)
    b = gamma_spec.sample(7, 1000)
    assert a == b and all(x > 0.0 for x in a)
    mean = sum(a) / len(a)
    assert abs(mean - 1.0) < 0.1, f"sample mean {mean}"

    # module-level functions
    approx(rdp.baseline_usefulness(1.0, 1.0), 1.0 - math.exp(-1.0), 1e-12)
    approx(rdp.baseline_usefulness(1.0, 2.0, 2.0), 1.0 - math.exp(-1.0), 1e-12)
    approx(rdp.gamma_threshold(1.0, 0.5), 1.4094, 1e-3)

    # calibration against an exact epsilon target
    result = rdp.optimize(2.0, families="gamma", restarts=8, seed=3)
    assert result["constraint_residual"] <= 1e-4
    assert abs(result["eps_achieved"] - 2.0) <= 1e-4
    spec_json = json.dumps(result["best_spec"])
    rdp.Spec.from_json(spec_json)  # the returned spec parses back

    # a released count query, deterministic under a seed
    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as f:
        f.write("age\n30\n25\n41\n")
        data = f.name
    r1 = rdp.release(data, "age", "count", 1.0, seed=11, spec=gamma_spec)
    r2 = rdp.release(data, "age", "count", 1.0, seed=11, spec=gamma_spec)
    assert r1["noisy_value"] == r2["noisy_value"]
    approx(r1["eps_certified"], 3.0 * math.log(1.5), 1e-9)
    assert "true_value" not in r1

    # invalid inputs raise
    for bad in (
        lambda: rdp.Spec.from_json('{"terms":[]}'),
        lambda: rdp.Spec.from_json('{"terms":[{"coef":1.0,"family":{"gamma":{"k":-1,"theta":1}}}]}'),
        lambda: gamma_spec.eps(-1.0),
        lambda: rdp.gamma_threshold(1.0, 1.5),
        lambda: rdp.release(data, "age", "sum", 1.0, seed=1, spec=gamma_spec),
    ):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print("rdp_py smoke test: all checks passed")


if __name__ == "__main__":
    main()
