"""Smoke test for the longmem Python extension.

Uses an installed `longmem` module when one is importable; otherwise builds
the extension with cargo and loads it from a temporary directory.
"""

import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import longmem

        return longmem
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "longmem-python", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "liblongmem.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "longmem.so")
    sys.path.insert(0, str(tmp))
    import longmem

    return longmem


def main():
    lm = load()

    f0 = lm.FexpParams.arfima(0.3, 1.0)
    gamma = f0.autocov(4)
    assert abs(gamma[0] - 1.3164560621300047) < 1e-12, gamma

    white = lm.FexpParams(0.0, [-math.log(2 * math.pi)])
    assert abs(white.eval(1.0) - 1 / (2 * math.pi)) < 1e-14

    f = lm.FexpParams(0.25, [0.1, 0.2])
    assert lm.kl_n(f0, f0, 32) < 1e-12
    assert lm.h(f0, f) > 0
    assert abs(lm.kl_inf(f0, f, paper=True) / lm.kl_inf(f0, f) - 4) < 1e-12
    assert lm.h(f0, f, paper=True) >= lm.log_l2(f0, f) / (2 * math.pi)

    xs = lm.simulate(f0, 256, replicates=2, seed=7)
    assert len(xs) == 2 and len(xs[0]) == 256
    assert xs == lm.simulate(f0, 256, replicates=2, seed=7)
    assert math.isfinite(lm.loglik(xs[0], f0))

    prior = lm.Prior.fexp_beta(2.0, 0.05, 1.5, 4.0)
    assert len(prior.sample(5, seed=1)) == 5
    post = lm.fit(xs[0], prior, lm.SamplerConfig(iterations=800, burn_in=300, thin=2, seed=3))
    assert len(post) == 250
    d_hat, se = post.estimate_d()
    assert -0.5 < d_hat < 0.5 and se >= 0
    grid = [math.pi * j / 16 for j in range(1, 17)]
    assert all(v > 0 for v in post.f_h(grid))

    try:
        lm.SamplerConfig(pmc=(100, 5))
        raise AssertionError("population Monte Carlo should be rejected")
    except NotImplementedError:
        pass

    csv, summary = lm.run_experiment("smoke", seed=2)
    lines = csv.splitlines()
    assert lines[0].startswith("n,replicate,status,d_hat")
    assert len(lines) == 1 + 2 * 2
    assert json.loads(summary)["kind"] == "consistency"

    passed, checks, violations = lm.validate_properties(0, 20)
    assert passed and checks > 0 and violations == 0

    print(f"smoke test passed: d_hat = {d_hat:.3f}, {checks} property checks")


if __name__ == "__main__":
    main()
