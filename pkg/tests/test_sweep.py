from __future__ import annotations

import csv
import io

import numpy as np
import pytest

from ezheston.errors import NoRealRoot, ParameterError
from ezheston.model import CaseTag, reference_params
from ezheston.sweep import DEFAULT_GAMMAS, PRESETS, SweepSpec, preset_spec, run_sweep


@pytest.fixture(scope="module")
def tables():
    m, p = reference_params()
    return {name: run_sweep(preset_spec(name, p), m, p) for name in PRESETS}


def test_inf_unit_gamma_constant_consumption(tables):
    t = tables["inf-unit-gamma"]
    assert np.all(t.column("c_over_x") == 0.08)
    pi = t.column("pi")
    assert np.all(np.diff(pi) < 0)
    assert np.array_equal(t.column("axis_value"), t.column("gamma"))


@pytest.mark.parametrize("name", ["inf-general-nu", "fin-general-nu"])
def test_general_presets(tables, name):
    t = tables[name]
    prev_c = None
    prev_pi = None
    for g in DEFAULT_GAMMAS:
        c, pi = t.column("c_over_x", g), t.column("pi", g)
        assert np.all(np.diff(c) > 0)
        assert np.all(pi == pi[0])
        if prev_c is not None:
            assert np.all(c < prev_c) and pi[0] < prev_pi
        prev_c, prev_pi = c, pi[0]


def test_fin_unit_t(tables):
    t = tables["fin-unit-t"]
    assert np.all(t.column("c_over_x") == 0.08)
    firsts = []
    for g in DEFAULT_GAMMAS:
        pi = t.column("pi", g)
        assert np.sum(np.abs(np.diff(pi))) < 0.02
        firsts.append(pi[0])
    assert all(a > b for a, b in zip(firsts, firsts[1:]))


def test_row_order_and_count(tables):
    t = tables["inf-general-nu"]
    rows = t.rows
    assert len(rows) == 50 * len(DEFAULT_GAMMAS)
    assert rows == sorted(rows, key=lambda r: (r[1], r[0]))


def test_csv_format(tables):
    text = tables["fin-general-nu"].to_csv()
    meta = [l for l in text.splitlines() if l.startswith("#")]
    assert any(l.startswith("# case: fin-general") for l in meta)
    assert any(l.startswith("# time_steps") for l in meta)
    body = [l for l in text.splitlines() if not l.startswith("#")]
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    assert rows[0] == ["axis_value", "gamma", "c_over_x", "pi"]
    assert len(rows) == 201


def test_overrides_recorded(tables):
    assert "phi 0.125 -> 1" in tables["inf-unit-gamma"].metadata["overrides"]
    assert "overrides" not in tables["fin-general-nu"].metadata


def test_spec_validation():
    with pytest.raises(ParameterError):
        SweepSpec(axis="x", lo=0, hi=1, count=2, case=CaseTag.INF_UNIT)
    with pytest.raises(ParameterError):
        SweepSpec(axis="nu", lo=1, hi=0, count=2, case=CaseTag.INF_UNIT)
    with pytest.raises(ParameterError):
        SweepSpec(axis="nu", lo=0, hi=1, count=0, case=CaseTag.INF_UNIT)
    with pytest.raises(ParameterError):
        SweepSpec(axis="nu", lo=0, hi=1, count=2, case=CaseTag.INF_UNIT, gammas=(-1.0,))
    assert SweepSpec(axis="nu", lo=0, hi=1, count=2, case="inf-unit", gammas=(3, 2)).gammas == (2.0, 3.0)
    with pytest.raises(ParameterError):
        preset_spec("nope", reference_params()[1])


def test_t_sweep_bounds():
    m, p = reference_params()
    spec = SweepSpec(axis="t", lo=0, hi=12, count=3, case=CaseTag.FIN_UNIT)
    with pytest.raises(ParameterError):
        run_sweep(spec, m, p)


def test_solver_errors_annotated():
    m, p = reference_params(xi=2.0, kappa=0.01)
    spec = SweepSpec(axis="nu", lo=0.01, hi=0.02, count=2, case=CaseTag.INF_UNIT, gammas=(0.5,))
    with pytest.raises(NoRealRoot, match="gamma=0.5"):
        run_sweep(spec, m, p)
