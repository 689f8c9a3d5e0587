"""Quick end-to-end check of the Python bindings.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import afem_stokes_py as afem


def main():
    mesh = afem.Mesh.unit_square(4)
    assert mesh.num_elements == 32
    assert abs(mesh.total_area() - 1.0) < 1e-14

    sol = afem.solve(mesh, "smooth1")
    assert len(sol.pressure) == mesh.num_elements
    assert max(abs(d) for d in sol.divergence()) < 1e-10
    eta = afem.estimate(sol, "smooth1")["eta"]
    assert len(eta) == mesh.num_elements and all(e >= 0 for e in eta)

    trace, final, summary = afem.adapt(afem.Mesh.lshape(), "lshape_singular", max_iter=8)
    assert len(trace) == 8 and summary["stop"] == "max-iterations"
    assert final.num_elements == trace[-1]["nelems"]
    assert trace[-1]["eta2"] < trace[0]["eta2"]

    rows, exponent = afem.counterexample()
    assert [r["N"] for r in rows] == [5, 11, 21, 41]
    assert 0.4 <= exponent <= 0.6

    checks = afem.verify(["counterexample"])
    assert all(passed for _, _, passed, _ in checks)

    try:
        afem.adapt(mesh, theta=1.5)
    except ValueError as err:
        assert "theta" in str(err)
    else:
        raise AssertionError("theta=1.5 accepted")

    print(f"ok: {final!r}, exponent {exponent:.4f}, {len(checks)} checks")


if __name__ == "__main__":
    main()
