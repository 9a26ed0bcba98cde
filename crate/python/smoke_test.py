"""Smoke test for the gfsim Python bindings.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import math

import gfsim


def main():
    fam = gfsim.StableFamily(1.5)
    lo, hi = fam.roots()
    assert abs(lo - 2.0) < 1e-9 and abs(hi - 3.0) < 1e-9, (lo, hi)
    assert abs(fam.kappa(2.5) + 1 / (2 * math.sqrt(math.pi))) < 1e-9
    assert fam.log_bound_exponents()[:2] == (1.0, 6.0)

    tree = gfsim.grow_tree(1.5, 1.0, seed=3, x_min=0.05, max_generation=2)
    assert len(tree) >= 1
    assert tree.martingale(1) >= 0.0
    t, a = tree.area_profile()
    assert all(x <= y for x, y in zip(a, a[1:]))
    assert tree.to_text().startswith("# tree")

    jumps, zeta = gfsim.simulate_spine(1.5, "minus", 1.0, seed=5)
    assert zeta is not None and zeta > 0.0
    assert all(after < before for _, before, after in jumps)

    mean, se = gfsim.exp_functional(1.5, -1.0, 4000, seed=1)
    assert abs(mean - math.sqrt(math.pi) / 2) < 5 * se, (mean, se)

    ids = [i for i, _ in gfsim.list_experiments()]
    assert "exp_cumulant_suite" in ids
    passed, summary, csv = gfsim.verify("exp_cumulant_suite", seed=7)
    assert passed and csv.startswith("# schema")

    try:
        gfsim.StableFamily(2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("theta outside (1, 3/2] must be rejected")
    print("smoke test passed")


if __name__ == "__main__":
    main()
