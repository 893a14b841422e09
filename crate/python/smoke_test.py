"""Smoke test for the ektau extension module.

Build and install first: pip install --no-build-isolation -e crates/py
"""

import math

import ektau


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    nil = ektau.Space.nil()
    cyl = ektau.Surface("cylinder:k=1", nil)
    f = cyl.forms(0.0, 0.0)
    close(f["H"], 0.5, 1e-10)
    close(f["K_ext"], -0.25, 1e-10)
    close(f["second_form"][0][1], 0.5, 1e-10)
    close(f["q"], 1.0, 1e-8)

    h2r = ektau.Space(-1.0, 0.0)
    rect = ektau.Surface("cylinder:k=0", h2r, domain=(0.0, 2.0, 0.0, 1.0))
    eig = rect.first_eigenvalue(nodes=64)
    close(eig["lambda1"], eig["predicted"], 0.01 * eig["predicted"])
    close(eig["predicted"], ektau.cylinder_lambda1(h2r, 0.0, 2.0, 1.0), 1e-12)

    rep = ektau.stability_sweep(nil, 1.0, sides=[1, 2, 4, 8], nodes=32)
    assert rep["verdict"]["verdict"] == "unstable", rep["verdict"]

    energies = ektau.log_cutoff_energies(4)
    for j, e in enumerate(energies, start=1):
        close(e, 2 * math.pi / j, 0.01 * 2 * math.pi / j)

    close(ektau.tangency_determinant(1.0, math.pi / 4, 0.3, 0.7),
          -math.sin(math.pi / 4) * (0.3 + math.sinh(2.0) * math.sqrt(1 + 0.49)), 1e-8)
    curve = ektau.tangency_curve(0.0, math.pi / 2, [-1.0, 0.0, 1.0])
    assert curve["kind"] == "curve" and all(abs(p[0]) < 1e-12 for p in curve["points"])

    sol = ektau.solve_graph(lambda y, z: 0.8 * y + 0.3 * (y * y - z * z), grid=21)
    assert sol["residual_sup"] < 1e-8, sol["residual_sup"]
    assert len(sol["u"]) == 21 and len(sol["u"][0]) == 21

    try:
        ektau.Space(0.0, 0.0)
    except ValueError as e:
        assert "space form" in str(e)
    else:
        raise AssertionError("space form accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
