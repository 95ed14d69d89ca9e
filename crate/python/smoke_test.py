"""Smoke test for the pystationary extension module."""

import math

import pystationary as ps


def main():
    names = ps.entry_names()
    assert "kerr" in names and "schwarzschild" in names, names

    kerr = ps.Entry("kerr", mass=1.0, spin=0.5)
    p = kerr.anchors[0]
    ric = kerr.ricci_blocks(p)
    assert max(abs(v) for row in ric for v in row) < 1e-6
    tw = kerr.twist_identities(p)
    assert tw["norm"] < 1e-8 and tw["divergence"] < 1e-6, tw
    tx, ty = kerr.tension_field(p)
    assert abs(tx) < 1e-4 and abs(ty) < 1e-4

    schw = ps.Entry("schwarzschild", mass=1.0)
    r = 6.0
    t_dot = math.sqrt(1.0 / (1.0 - 3.0 / r))
    orbit = schw.geodesic([r, math.pi / 2, 0.0], [t_dot, 0.0, 0.0, t_dot * math.sqrt(1.0 / r**3)], 100.0)
    assert orbit["exit"] == "reached_smax", orbit["exit"]
    assert orbit["max_c_drift"] < 1e-8
    assert all(abs(x[0] - r) < 1e-6 for x in orbit["x"])

    rep = schw.gradient_estimate([r, math.pi / 2, 0.0], 1.0, rays=8, per_ray=4, seed=1)
    assert math.isfinite(rep["implied_constant"]), rep
    rep = ps.Entry("ads").curvature_estimate([0.5, 0.0, 0.0], 0.5, rays=8, per_ray=4)
    assert abs(rep["sup"] - math.sqrt(24.0)) < 1e-6, rep["sup"]

    report = ps.Entry("minkowski-rotating").check(samples=3)
    assert report["pass"], report

    try:
        ps.Entry("kerr", spin=2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("overspinning Kerr accepted")

    print("smoke test passed:", ", ".join(names))


if __name__ == "__main__":
    main()
