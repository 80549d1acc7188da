import pytest

import percoz


def test_version():
    assert percoz.__version__.count(".") == 2


def test_phi_axis():
    r = percoz.phi([3, 0, 0])
    assert (r["phi"], r["psi"], r["certified"]) == (18, 3, True)


def test_exact_cube():
    r = percoz.exact("connect", [0, 0, 0], [1, 1, 1], [1, 1, 1], p=[0.5])
    assert r["counts_by_open_edges"][3] == 6
    assert r["values"][0]["value"] == pytest.approx(sum(r["counts_by_open_edges"]) / 4096)


def test_renewal_geometric():
    k = percoz.synthetic_kernel({"model": "geometric", "dim": 2, "q": 0.3})
    h = {tuple(e["x"]): e["value"] for e in percoz.renewal_solve(k, 6)["entries"]}
    assert h[(5, 0)] == pytest.approx(0.3 ** 5, rel=1e-12)


def test_oz_model_and_fit():
    k = percoz.synthetic_kernel({"model": "full-rank", "dim": 2, "a": 0.2, "b": 0.2, "c": 0.1})
    m = percoz.oz_model(k, [1.0, 0.0])
    assert m["mu"][1] == pytest.approx(0.0, abs=1e-12)
    h = {tuple(e["x"]): e["value"] for e in percoz.renewal_solve(k, 120)["entries"]}
    series = {"direction": [1, 0], "step": 1, "source": "renewal-solve",
              "samples": [{"n": n, "value": h[(n, 0)], "std_error": 0} for n in range(20, 121)]}
    f = percoz.oz_fit(series, 2)
    assert f["phi"] == pytest.approx(m["phi"], rel=0.05)
    assert not f["model_mismatch"]


def test_estimate_deterministic():
    a = percoz.estimate(3, 0.3, 4, 300, seed=5, threads=1)
    b = percoz.estimate(3, 0.3, 4, 300, seed=5, threads=2)
    assert a == b
    assert a["implication_violations"] == 0


def test_domain_error():
    with pytest.raises(ValueError):
        percoz.estimate(3, 1.5, 4, 10)
