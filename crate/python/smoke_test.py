"""Smoke test for the `nlhelm` extension module.

Uses an installed `nlhelm` if there is one, otherwise loads the shared
library from target/release (build it with
`cargo build --release -p nlhelm-py --features extension-module`).
"""

import cmath
import importlib.util
import math
import pathlib
import sys


def load():
    try:
        import nlhelm

        return nlhelm
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for name in ("libnlhelm.so", "libnlhelm.dylib", "nlhelm.dll"):
        path = root / "target" / "release" / name
        if path.exists():
            spec = importlib.util.spec_from_file_location("nlhelm", path)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("nlhelm extension not found; build it first")


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    nl = load()

    r = nl.solve_ktilde("exp", 1 / 16, 1.6)
    assert r.regime == "propagating"
    assert close(r.ktilde, 1.6 / math.sqrt(1 - 0.01), 1e-12)
    assert r.k0 == 16.0

    kernel = nl.Kernel("gauss", 1 / (4 * math.pi))
    g = nl.solve_ktilde("gauss", kernel.delta, 2 * math.pi / 5)
    assert close(kernel.mu(g.ktilde), (2 * math.pi / 5) ** 2, 1e-10)
    z = complex(1.0, 0.5)
    assert close(kernel.mu(z), kernel.mu_closed_form(z), 1e-10)

    pml = nl.Pml(10.0, 10.0, 0.5)
    assert pml.sigma(5.0) == 0.0 and close(pml.sigma(20.0), 0.5, 1e-15)

    exact = nl.ExactSolution(1.6, 1 / 16)
    exp = nl.Experiment("exp", 1 / 16, 1.6, 40 / 512)
    assert exp.case() == "case1"
    sol = exp.solve()
    i = sol.x.index(0.0)
    assert abs(sol.u[i] - exact(0.0)) < 1e-2 * abs(exact(0.0))
    assert cmath.isclose(sol.u[i - 10], sol.u[i + 10], rel_tol=1e-9)

    study = exp.convergence([40 / 128, 40 / 256, 40 / 512])
    assert 1.7 <= study.rate_l2 <= 2.3, study.rate_l2
    assert 0.7 <= study.rate_h1 <= 1.3, study.rate_h1

    sweep = exp.sweep("sigma0", [0.1, 0.2, 0.4])
    assert sweep.rows[-1][1] < sweep.rows[0][1]

    try:
        nl.Experiment("exp", 1 / 16, 1.6, 0.3)
    except ValueError:
        pass
    else:
        raise AssertionError("h that does not divide l + d must be rejected")

    print("nlhelm smoke test passed")


if __name__ == "__main__":
    main()
