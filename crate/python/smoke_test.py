"""Smoke test for the Python extension.

    pip install --no-build-isolation ./crates/python
    python python/smoke_test.py
"""

import math

import transolve


def main():
    f = transolve.Expr("x^2 - 4")
    assert f(3.0) == 5.0
    assert f.derivative()(3.0) == 6.0
    assert transolve.Expr(str(f)) == f

    out = transolve.solve("x^2 - 4", 1.0)
    assert out["status"] == "converged" and out["root"] == 2.0, out
    assert transolve.solve("x^2", 0.0)["status"] == "derivative_vanished"
    assert abs(transolve.bisection("x^3 - 2", 0.0, 2.0) - 2 ** (1 / 3)) < 1e-9

    kepler = {"eccentricity": 0.3, "mean_anomaly_rad": 1.0}
    expr, x0 = transolve.build_residual("orbital", kepler)
    gt = transolve.ground_truth("orbital", kepler)
    e_anom = x0
    for _ in range(50):
        e_anom -= (e_anom - 0.3 * math.sin(e_anom) - 1.0) / (1 - 0.3 * math.cos(e_anom))
    assert gt == round(e_anom, 3), (gt, e_anom)
    assert abs(expr(e_anom)) < 1e-9
    assert transolve.render_query("orbital", kepler)

    ds = transolve.generate_dataset(42)
    assert len(ds) == 100
    assert ds == transolve.generate_dataset(42)
    assert len(transolve.generate_dataset(1, {"fluid": 2, "orbital": 0})) == 70

    assert transolve.relative_error(1.1, 1.0) == transolve.relative_error(-1.1, -1.0)
    assert math.isnan(transolve.mean_relative_error([(float("nan"), 1.0)]))
    assert abs(transolve.mean_relative_error([(1.1, 1.0), (float("nan"), 2.0)]) - 0.1) < 1e-12
    assert transolve.improvement(0.5, 0.25) == 50.0
    try:
        transolve.improvement(0.0, 0.1)
    except ZeroDivisionError:
        pass
    else:
        raise AssertionError("zero baseline accepted")

    buckets = transolve.convergence_buckets(
        [(3, "converged"), (40, "converged"), (1000, "max_iterations"), (1, "derivative_vanished")]
    )
    assert buckets == {"fast": 1, "slow": 1, "very_slow": 1, "failed": 1}, buckets
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
