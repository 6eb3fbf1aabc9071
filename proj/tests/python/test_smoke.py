import json
import math

import pytest

import aaobayes


def test_default_config_keys():
    cfg = aaobayes.default_config()
    for key in ("fine_n", "coarse_n", "delta", "kappa_p", "gamma_p", "T", "N"):
        assert key in cfg


def test_is_pair_solves_quadratic():
    for mu in (1e-3, 0.1, 2.0):
        up, lo = aaobayes.is_eigenvalue_pair(mu)
        assert up >= lo > 0
        # roots of l^2 - (2 + mu) l + mu = 0
        assert math.isclose(up + lo, 2 + mu, rel_tol=1e-12)
        assert math.isclose(up * lo, mu, rel_tol=1e-10)


def test_bh_cubic_roots_finite():
    roots, cplx, log_small = aaobayes.bh_cubic_roots(0.5, 1.0)
    assert not cplx
    assert len(roots) == 3
    assert all(math.isfinite(r) for r in roots)
    assert math.isclose(math.log(roots[0]), log_small, rel_tol=1e-8)


def test_spc_run_writes_manifest(tmp_path):
    out = tmp_path / "spc"
    res = aaobayes.run("spc", spc_modes=3, spc_draws=10, output_dir=str(out))
    assert res["results"]["total"] > 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert manifest["config"]["spc_modes"] == 3


def test_bad_config_raises(tmp_path):
    with pytest.raises(ValueError):
        aaobayes.run("spectrum", no_such_key=1, output_dir=str(tmp_path))
    with pytest.raises(ValueError):
        aaobayes.run("spc", fine_n=3, output_dir=str(tmp_path))
