import dataclasses
import math

import numpy as np
import pytest

import rvm1d.driver as drv
from rvm1d import ConfinementError, run, run_picard, run_time_marching
from rvm1d.driver import BoundViolation, PicardDivergence, picard_initial, picard_iterate_once

from conftest import config


def _wave_exact(cfg, t):
    x = np.linspace(0, 1, cfg.nx + 1)
    return np.cos(2 * math.pi * (x - t))


def test_vacuum_stays_zero():
    r = run_time_marching(config("vacuum"))
    assert r.n_steps == config("vacuum").n_steps
    for fs, cur in zip(r.field_states, r.current_history):
        assert not fs.e1.any() and not fs.k_plus.any() and not fs.k_minus.any()
        assert not cur.rho.any() and not cur.j2.any()
    assert not r.final_f.values.any()
    assert r.violations == []


def test_wave_is_dalembert_translate():
    cfg = config("wave")
    r = run_time_marching(cfg)
    for fs in r.field_states:
        exact = _wave_exact(cfg, fs.t)
        assert np.allclose(fs.e2, exact, rtol=0, atol=1e-13)
        assert np.allclose(fs.b, exact, rtol=0, atol=1e-13)


def test_snapshot_stride_keeps_last_step():
    cfg = config("vacuum")
    r = run_time_marching(cfg, snapshot_stride=5)
    assert sorted(r.f_states) == sorted(set(range(0, cfg.n_steps + 1, 5)) | {cfg.n_steps})
    assert len(r.diagnostics) == len(r.field_states) == cfg.n_steps + 1


def test_march_is_deterministic():
    cfg = config("confined_bump").replace(nx=16, nv=8, t_final=0.25)
    a = run_time_marching(cfg)
    b = run_time_marching(cfg)
    assert a.final_f.values.tobytes() == b.final_f.values.tobytes()
    for fa, fb in zip(a.field_states, b.field_states):
        assert fa.e1.tobytes() == fb.e1.tobytes()
        assert fa.k_plus.tobytes() == fb.k_plus.tobytes()


def test_march_conserves_gauss_law(confined_small):
    dx = confined_small.cfg.dx
    for fs, cur in zip(confined_small.field_states, confined_small.current_history):
        total = dx * (cur.rho.sum() - 0.5 * (cur.rho[0] + cur.rho[-1]))
        assert fs.e1[-1] - fs.e1[0] == pytest.approx(total, abs=1e-14)


def test_confinement_error_carries_step(monkeypatch):
    cfg = config("confined_bump").replace(nx=16, nv=8, t_final=0.25)
    real = drv.advance_f
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 5:  # predictor of the third step
            raise ConfinementError("confinement violated: injected")
        return real(*args, **kwargs)

    monkeypatch.setattr(drv, "advance_f", flaky)
    with pytest.raises(ConfinementError) as exc:
        run_time_marching(cfg)
    assert exc.value.step == 3


def test_abort_on_violation():
    cfg = config("confined_bump").replace(nx=16, nv=8, t_final=0.25)
    cfg = cfg.replace(allowance=dataclasses.replace(cfg.allowance, support_cells=-100.0))
    with pytest.raises(BoundViolation, match="v_support") as exc:
        run_time_marching(cfg, abort_on_violation=True)
    assert exc.value.step == 0
    assert run_time_marching(cfg).violations[0][:2] == (0, "v_support")


# ---------------------------------------------------------------- Picard

def test_picard_vacuum_fixed_point():
    cfg = config("vacuum").replace(solver_mode="picard", picard_tol=1e-12, t_final=0.25)
    r = run_picard(cfg)
    assert r.residuals == [0.0]
    assert not any(fs.k_plus.any() or fs.e1.any() for fs in r.field_states)


def test_picard_wave_only():
    cfg = config("wave").replace(solver_mode="picard", picard_tol=1e-12, nx=32, t_final=0.5)
    r = run(cfg)
    assert r.residuals[-1] == 0.0 and len(r.residuals) <= 2
    for fs in r.field_states:
        exact = _wave_exact(cfg, fs.t)
        assert np.allclose(fs.e2, exact, rtol=0, atol=1e-12)
        assert np.allclose(fs.b, exact, rtol=0, atol=1e-12)


def test_picard_initial_iterate():
    cfg = config("picard_small").replace(nx=16, nv=8, t_final=0.25)
    st = picard_initial(cfg)
    assert st.n == 0 and st.f.shape[0] == cfg.n_steps + 1
    assert all(np.array_equal(st.f[k], st.f[0]) for k in range(st.f.shape[0]))
    assert all(np.array_equal(fs.e1, st.fields[0].e1) for fs in st.fields)
    assert st.fields[0].e1[-1] == pytest.approx(
        cfg.initial_data.f0.l1_norm() + cfg.lam, rel=5e-2)


def test_picard_residuals_contract_on_small_data():
    cfg = config("picard_small").replace(nx=16, nv=10, t_final=0.25)
    st = picard_initial(cfg)
    res = []
    for _ in range(4):
        st = picard_iterate_once(st, cfg)
        res.append(st.residual)
    assert all(b < 0.8 * a for a, b in zip(res[:-1], res[1:]))


def test_picard_divergence_reports_history():
    cfg = config("picard_small").replace(nx=16, nv=10, t_final=0.25, picard_tol=1e-300,
                                         picard_max_iter=2)
    with pytest.raises(PicardDivergence) as exc:
        run_picard(cfg)
    assert len(exc.value.residuals) == 2
