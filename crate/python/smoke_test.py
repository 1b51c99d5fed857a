#!/usr/bin/env python3
"""Smoke test for the badbeta Python extension.

Builds nothing itself: expects `cargo build -p badbeta-py` (or --release) to
have produced target/{debug,release}/libbadbeta.so. The shared library is
copied next to a temp directory as badbeta.so and imported from there.

Run from the repository root:

    cargo build -p badbeta-py
    python3 python/smoke_test.py
"""

import json
import math
import os
import random
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    candidates = [
        os.path.join(REPO, "target", profile, "libbadbeta.so")
        for profile in ("release", "debug")
    ]
    src = next((c for c in candidates if os.path.exists(c)), None)
    if src is None:
        sys.exit("libbadbeta.so not found; run `cargo build -p badbeta-py` first")
    stage = tempfile.mkdtemp(prefix="badbeta_py_")
    shutil.copy(src, os.path.join(stage, "badbeta.so"))
    sys.path.insert(0, stage)
    import badbeta  # noqa: E402

    return badbeta


def approx(a, b, tol=1e-9):
    assert abs(a - b) < tol, f"{a} != {b} (tol {tol})"


def main():
    bb = load_module()
    rng = random.Random(7)

    # Beta estimators: identity and scaling assets.
    market = [0.01 * (rng.random() - 0.5) for _ in range(1260)]
    doubled = [2.0 * m for m in market]
    approx(bb.beta_ols(market, market), 1.0, 1e-10)
    approx(bb.beta_ols(doubled, market), 2.0, 1e-10)
    approx(bb.beta_fp(doubled, market, 252), 2.0, 1e-8)
    approx(bb.beta_welch(doubled, market, 3.0), bb.beta_ols(doubled, market), 1e-12)
    approx(bb.beta_dimson(doubled, market, 1, 0.0, 1.0), 1.0, 1e-12)

    # Sorting: three assets split one per tercile; double sort diagonal.
    assert bb.tercile_sort([0.5, 1.0, 1.5]) == [1, 2, 3]
    labels = bb.double_sort_3x3(list(range(12)), [2 * v for v in range(12)])
    assert set(labels) == {1, 5, 9}, labels

    # Worked factor-return example.
    approx(bb.factor_return(0.5, 2.0, 0.01, 0.02, 0.0), 0.01, 1e-15)

    # Spread estimators: zero range means zero spread; gibbs is
    # deterministic per seed.
    n = 40
    assert bb.corwin_schultz([10.0] * n, [10.0] * n) == 0.0
    mid = math.exp((math.log(10.0) + math.log(9.0)) / 2.0)
    assert bb.abdi_ranaldo([mid] * n, [10.0] * n, [9.0] * n) < 1e-9
    closes = [50.0 * math.exp(0.01 * rng.gauss(0, 1)) for _ in range(300)]
    g1 = bb.gibbs_spread(closes, 200, 50, 42)
    g2 = bb.gibbs_spread(closes, 200, 50, 42)
    assert g1 == g2, "gibbs must be deterministic for a seed"
    # VoV power law: eight-fold dollar volume halves the spread... cubed.
    flatpx = [50.0] * 30
    rets = [0.02 * (rng.random() - 0.5) for _ in range(30)]
    s1 = bb.vov_spread([1e6 / 50.0] * 30, flatpx, rets, 8e3)
    s8 = bb.vov_spread([8e6 / 50.0] * 30, flatpx, rets, 8e3)
    approx(s1 / s8, 2.0, 1e-9)

    # VAR news: white-noise states give near-zero news weights, and the
    # cash-flow/discount-rate identity holds exactly.
    states = [[0.04 * rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1)]
              for _ in range(3000)]
    _, _, weights = bb.estimate_var(states, 0.95)
    assert max(abs(w) for w in weights) < 0.1, weights
    n_cf, n_dr, unexpected = bb.news_from_var(states, 0.95)
    for c, d, u in zip(n_cf, n_dr, unexpected):
        approx(c - d, u, 1e-12)

    # Regression and performance statistics.
    y = [0.5 + 1.2 * m for m in market[:120]]
    res = bb.ols_regress(y, [market[:120]], ["mkt"])
    approx(res["coefficients"][0], 0.5, 1e-9)
    approx(res["coefficients"][1], 1.2, 1e-9)
    approx(res["r_squared"], 1.0, 1e-9)
    rets = [0.02 * (rng.random() - 0.4) for _ in range(60)]
    p1 = bb.perf_stats(rets)
    p5 = bb.perf_stats([5.0 * r for r in rets])
    approx(p1["sharpe_ann"], p5["sharpe_ann"], 1e-10)
    curve = bb.cumulative_curve([0.1, -0.1])
    approx(curve[0], 1.1, 1e-12)
    approx(curve[1], 0.99, 1e-12)

    # End-to-end pipeline on a small synthetic economy.
    with tempfile.TemporaryDirectory(prefix="badbeta_run_") as tmp:
        cfg_path = os.path.join(tmp, "smoke.cfg")
        with open(cfg_path, "w") as fh:
            fh.write(
                "seed = 5\n"
                f"out = {os.path.join(tmp, 'out')}\n"
                "synth.n_assets = 35\n"
                "synth.n_months = 140\n"
                "synth.alpha_split = 0.003\n"
                "sort.scheme = bab\n"
                "sort.min_assets_tercile = 20\n"
                "sort.min_valid_months = 12\n"
                "cost.gibbs_sweeps = 50\n"
                "cost.gibbs_burn = 10\n"
                "cost.vov_scale = 8.0\n"
                "report.estimators = fp\n"
            )
        report_path = bb.run_pipeline(cfg_path)
        with open(report_path) as fh:
            report = json.load(fh)
        assert "bab" in report["factors"], report["factors"].keys()
        assert report["factors"]["bab"]["months"] >= 12
        assert report["factors"]["bab"]["gross"]["mean_ann"] > 0.0
        files = bb.generate_dataset(cfg_path)
        assert any(p.endswith("monthly.csv") for p in files)

    print("smoke test passed")


if __name__ == "__main__":
    main()
