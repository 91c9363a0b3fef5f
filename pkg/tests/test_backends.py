import math
import os
import subprocess
import sys

import numpy as np
import pytest

from martstab import _accel
from martstab.bellman import Family, majorization_sweep
from martstab.chain import ChainSpec, chain_lp_summary
from martstab.kernels.wedge_mc import simulate_exits


def test_backend_resolution(monkeypatch):
    monkeypatch.setenv(_accel.DISABLE_FLAG, "1")
    assert _accel.resolve_backend() == "numpy"
    monkeypatch.delenv(_accel.DISABLE_FLAG)
    monkeypatch.setenv("NUMBA_DISABLE_JIT", "1")
    assert _accel.resolve_backend() == "numpy"
    assert _accel.resolve_backend("numba") == "numba"
    with pytest.raises(ValueError):
        _accel.resolve_backend("fortran")


@pytest.mark.parametrize("p", [1.5, 3.0])
@pytest.mark.parametrize("family", list(Family))
def test_majorization_backends_agree(p, family):
    a = majorization_sweep(p, family, n=50_001, backend="numba")
    b = majorization_sweep(p, family, n=50_001, backend="numpy")
    assert a.max_gap == pytest.approx(b.max_gap, abs=1e-15)
    assert a.argmax == b.argmax


@pytest.mark.parametrize("p,eta", [(1.5, 0.05), (4.0, 0.0)])
def test_chain_backends_agree(p, eta):
    spec = ChainSpec(p, 3.0, 5000, eta)
    a = chain_lp_summary(spec, backend="numba")
    b = chain_lp_summary(spec, backend="numpy")
    assert a.log_normF == pytest.approx(b.log_normF, abs=1e-12)
    assert a.log_normG == pytest.approx(b.log_normG, abs=1e-12)
    assert a.log_deficit == pytest.approx(b.log_deficit, abs=1e-10)


def test_wedge_mc_backends_agree_in_law():
    a = math.pi / 2 - 0.36
    kw = dict(start_local=(1.0, 0.0), n_paths=1500, dt=1e-4, seed=11, m_split=2)
    r1 = simulate_exits(a, backend="numba", **kw)
    r2 = simulate_exits(a, backend="numpy", **kw)
    # compiled and interpreted generators need not share streams; compare moments
    m1 = np.bincount(r1["root"], r1["w"] * np.hypot(r1["x"], r1["y"]), 1500)
    m2 = np.bincount(r2["root"], r2["w"] * np.hypot(r2["x"], r2["y"]), 1500)
    se = math.hypot(m1.std(), m2.std()) / math.sqrt(1500)
    assert abs(m1.mean() - m2.mean()) < 4 * se
    assert np.bincount(r1["root"], r1["w"], 1500) == pytest.approx(np.ones(1500))


def test_env_flag_subprocess():
    env = dict(os.environ, MARTSTAB_DISABLE_NUMBA="1")
    code = "from martstab._accel import resolve_backend; print(resolve_backend())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"
