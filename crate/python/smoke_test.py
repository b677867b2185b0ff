"""Smoke test for the sphslice_py extension.

Build first: pip install --no-build-isolation -e crates/python
"""

import math

import sphslice_py as s


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    quad = s.Quadrature()

    # Great circle length on S^2 at plane distance 0.6.
    one = s.SphereField.family("constant", 2, 2)
    plane = s.SlicePlane.random(2, 2, 1, seed=1, dist=0.6)[0]
    close(s.slice_transform(one, plane, quad), 2 * math.pi * 0.8, 1e-9)

    # A Python callable agrees with the built-in family.
    gauss = s.SphereField.family("zonal_gaussian", 3, 2)
    py_gauss = s.SphereField.from_callable(lambda c: math.exp(-(1 + c[-1]) / (1 - c[-1])), zonal=True)
    for p in s.SlicePlane.random(3, 2, 5, seed=2):
        close(s.slice_transform(py_gauss, p), s.slice_transform(gauss, p), 1e-12)
        lhs, rhs = s.factorization_check(gauss, p)
        close(lhs, rhs, 1e-6 * max(1.0, abs(lhs)))

    # Line integrals of a Gaussian on R^2.
    g = s.PlaneField.gaussian([0.0, 0.0], 1.0)
    line = s.SlicePlane([[0.0, 1.0]], [1.0, 0.0])
    close(s.radon_john(g, line), math.sqrt(math.pi) * math.exp(-1.0), 1e-10)

    # Abel round trip of the zonal Gaussian profile.
    prof = s.ZonalProfile.from_callable(lambda x: math.exp(-x * x))
    rec = s.zonal_round_trip(prof, 3, 3)
    assert s.weighted_sup_error(rec, prof, 0.1, 10.0) < 1e-3

    # Numerical diagnostics and constants.
    verdict, _ = s.existence(s.SphereField.family("pole_power", 3, 2, {"mu": 0.6}), 3, 2)
    assert verdict == "diverges", verdict
    beyond, control, holds = s.support(s.SphereField.family("cap_bump", 2, 2), 0.0, 2, 2, trials=20)
    assert holds and control > 1e-3
    close(s.coeff_c(1, 3), math.pi, 1e-12)

    try:
        s.SlicePlane.random(3, 4, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("k > n accepted")
    print("smoke test ok")


if __name__ == "__main__":
    main()
