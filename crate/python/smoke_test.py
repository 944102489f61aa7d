"""Smoke test for the irand Python extension.

Build and install it first:

    pip install --no-build-isolation -e crates/py
"""

import math
import os
import tempfile

import irand


def main():
    panel = irand.Panel.synthesize(300, seed=5)
    assert len(panel) == 300
    assert "LCD" in panel.variables and "T2D" in panel.variables

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "panel.csv")
        panel.save(path)
        back = irand.Panel.load(path, "LCD", ["Gender", "Age"], "T2D")
        assert back.to_csv() == panel.to_csv()

    report = irand.estimate(panel, m=8, s=20, seed=1)
    assert report["completed"] + report["skipped"] == 8
    assert 0.0 <= report["mean_p_value"] <= 1.0
    print(f"irand on synthetic cohort: ate={report['mean_ate']:.3f} p={report['mean_p_value']:.3f}")

    sim = irand.Panel.simulate("lcd_like", 200, 0.5, seed=3)
    ate = irand.estimate(sim, m=20, s=0, seed=3)["mean_ate"]
    assert abs(ate - 1.0) < 0.3, ate
    pooled = irand.pooled(sim)["estimate"]["ate"]
    did = irand.did_regression(sim)["delta_hat"]
    print(f"simulated delta=1: irand={ate:.3f} pooled={pooled:.3f} did={did:.3f}")

    reports = irand.mediate(panel, "BMI", m=4, s=10, seed=2)
    r = reports[0]
    assert r["indirect"]["ate"] == r["total"]["ate"] - r["direct"]["ate"]
    print(f"mediation via BMI: total={r['total']['ate']:.3f} direct={r['direct']['ate']:.3f}")

    surface = irand.mse_experiment("lcd_like", grid_n=[40], grid_sigma=[1.0], replicates=3, m=4)
    assert len(surface["cells"]) == 3
    assert all(math.isfinite(c["mse"]) for c in surface["cells"])

    try:
        irand.estimate(panel, treatment="missing")
    except irand.IrandError as e:
        print(f"error surfaced: {e}")
    else:
        raise AssertionError("expected IrandError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
