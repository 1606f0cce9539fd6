import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flagbench.channel_fit import (
    ALT_FAULT_QUBITS,
    DEFAULT_FAULT_QUBITS,
    FitResult,
    eq1_channel,
    fit_p,
    per_pauli_error_rate,
)
from flagbench.code513 import minus_logical_state
from flagbench.device import depolarizing_channel
from flagbench.quantum import DensityMatrix, apply_kraus, partial_trace, spectral_norm, tensor_product, StateVector

from helpers import random_density

PSI = minus_logical_state()


def test_defaults():
    assert DEFAULT_FAULT_QUBITS == (1, 5) and ALT_FAULT_QUBITS == (2, 4)


def test_p_one_is_identity():
    assert np.allclose(eq1_channel(PSI, 1.0).matrix, PSI.to_density().matrix)


def test_full_depolarization_point():
    # the Pauli channel reaches I/2 at no-error probability 1/4; p = 0 flips with certainty
    prod = StateVector.from_label("0+1-0")
    out = eq1_channel(prod, 0.25)
    assert np.allclose(partial_trace(out, [0]).matrix, np.eye(2) / 2)
    assert np.allclose(partial_trace(out, [4]).matrix, np.eye(2) / 2)
    assert np.allclose(partial_trace(out, [1, 2, 3]).matrix, partial_trace(prod.to_density(), [1, 2, 3]).matrix)
    zero = eq1_channel(prod, 0.0)
    assert np.allclose(partial_trace(zero, [0]).matrix, np.diag([1 / 3, 2 / 3]))


@pytest.mark.parametrize("p", [0.0, 0.25, 0.64258, 0.9, 1.0])
@pytest.mark.parametrize("pair", [(1, 5), (2, 4)])
def test_matches_kraus_composition(p, pair):
    ch = depolarizing_channel(p)
    ref = apply_kraus(apply_kraus(PSI.to_density(), ch, [pair[0] - 1]), ch, [pair[1] - 1])
    assert np.allclose(eq1_channel(PSI, p, pair).matrix, ref.matrix, atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_trace_and_psd_preserving(seed, p):
    rho = DensityMatrix(5, random_density(np.random.default_rng(seed), 5, rank=3))
    out = eq1_channel(rho, p)
    assert abs(np.trace(out.matrix) - 1) < 1e-12
    assert np.linalg.eigvalsh(out.matrix).min() >= -1e-10


def test_argument_checks():
    with pytest.raises(ValueError):
        eq1_channel(PSI, 1.5)
    with pytest.raises(ValueError):
        eq1_channel(PSI, 0.5, (2, 2))
    with pytest.raises(ValueError):
        eq1_channel(PSI, 0.5, (0, 6))


def test_fit_identity():
    res = fit_p(PSI, PSI)
    assert res.p_opt == pytest.approx(1, abs=1e-4) and res.residual <= 1e-10


@pytest.mark.parametrize("p", [0.1, 0.3, 0.5, 0.64258, 0.9, 1.0])
def test_fit_round_trip(p):
    res = fit_p(eq1_channel(PSI, p), PSI)
    assert abs(res.p_opt - p) <= 1e-3
    assert res.fault_qubits == (1, 5) and res.objective == "spectral"


def test_fit_alternative_pair_and_objective():
    target = eq1_channel(PSI, 0.7, (2, 4))
    assert fit_p(target, PSI, (2, 4)).p_opt == pytest.approx(0.7, abs=1e-3)
    assert fit_p(target, PSI, (2, 4), objective="trace").p_opt == pytest.approx(0.7, abs=1e-3)
    with pytest.raises(ValueError):
        fit_p(target, PSI, objective="frobenius")


def test_scan_properties():
    res = fit_p(eq1_channel(PSI, 0.64258), PSI)
    ps = [p for p, _ in res.scan]
    rs = np.array([r for _, r in res.scan])
    assert len(ps) == 1001 and ps[0] == 0 and ps[-1] == 1
    assert all(res.residual <= r + 1e-15 for r in rs)
    local_minima = np.sum((rs[1:-1] < rs[:-2]) & (rs[1:-1] < rs[2:]))
    assert local_minima <= 1
    # grid neighbours at +-0.05 never beat the optimum
    target = eq1_channel(PSI, 0.64258)
    for dp in (-0.05, 0.05):
        off = spectral_norm(target.matrix - eq1_channel(PSI, res.p_opt + dp).matrix)
        assert res.residual <= off


def test_per_pauli_rate():
    assert per_pauli_error_rate(1.0) == 0
    assert per_pauli_error_rate(0.64258) == pytest.approx(0.11914, abs=5e-6)
    assert per_pauli_error_rate(0.25) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        per_pauli_error_rate(-0.1)


def test_fit_result_json():
    res = fit_p(eq1_channel(PSI, 0.5), PSI)
    back = FitResult.from_dict(json.loads(res.to_json()))
    assert back.p_opt == res.p_opt and back.fault_qubits == res.fault_qubits
    assert back.per_pauli_error_rate == (1 - res.p_opt) / 3
