"""Certificates: witness validation, fitters, checkers, serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cocycle_lab import (
    ExpInstabilityCertificate,
    ExpWitness,
    InstabilityCertificate,
    IntegralInstabilityCertificate,
    NoCertificate,
    ParametricDecay,
    PreconditionError,
    QuadratureConfig,
    SampleGrid,
    TabulatedDecay,
    TabulatedWitness,
    Trivial,
    certificate_from_json_dict,
    certificate_to_json_dict,
    check_decay,
    check_exp_instability,
    check_instability,
    check_integral_instability,
    decay_limit_witnessed,
    decay_to_exponential,
    estimate_decay,
    estimate_exp_instability,
    estimate_instability,
    estimate_integral_instability,
    pure_exponential_model,
    sin_scalar_model,
)

from conftest import grid_for


# ---------------------------------------------------------------------------
# Witness functions
# ---------------------------------------------------------------------------


def test_exp_witness_validation():
    with pytest.raises(PreconditionError):
        ExpWitness(0.0, 1.0)
    with pytest.raises(PreconditionError):
        ExpWitness(-2.0, 1.0)
    with pytest.raises(PreconditionError):
        ExpWitness(1.0, math.inf)
    w = ExpWitness(2.0, 0.5)
    assert w.value(2.0) == pytest.approx(2.0 * math.e, rel=1e-15)
    assert w.log_value(2.0) == pytest.approx(math.log(2.0) + 1.0, rel=1e-15)
    assert w.breakpoints() == ()


def test_tabulated_witness_validation():
    with pytest.raises(PreconditionError):
        TabulatedWitness.from_values([], [])
    with pytest.raises(PreconditionError):
        TabulatedWitness.from_values([0.0, 1.0], [1.0])
    with pytest.raises(PreconditionError):
        TabulatedWitness.from_values([1.0, 1.0], [1.0, 2.0])
    with pytest.raises(PreconditionError):
        TabulatedWitness.from_values([0.0, 1.0], [1.0, -2.0])
    with pytest.raises(PreconditionError):
        TabulatedWitness.from_log_values([0.0], [math.nan])


def test_tabulated_witness_step_lookup():
    w = TabulatedWitness.from_values([0.0, 1.0, 2.0], [5.0, 3.0, 2.0])
    # value at the nearest knot time >= t, clamped to the last knot
    assert w.value(0.0) == 5.0
    assert w.value(0.5) == 3.0
    assert w.value(1.0) == 3.0
    assert w.value(1.5) == 2.0
    assert w.value(2.0) == 2.0
    assert w.value(99.0) == 2.0
    assert w.log_value(0.5) == math.log(3.0)
    assert w.breakpoints() == (0.0, 1.0, 2.0)


# ---------------------------------------------------------------------------
# Certificate invariants
# ---------------------------------------------------------------------------


def test_parametric_decay_validation():
    with pytest.raises(PreconditionError):
        ParametricDecay(0.5, 1.0)
    with pytest.raises(PreconditionError):
        ParametricDecay(2.0, 0.0)
    f = ParametricDecay(2.0, 1.0)
    assert f.value(0.0) == 0.5
    assert f.log_value(3.0) == pytest.approx(-3.0 - math.log(2.0), rel=1e-15)


def test_tabulated_decay_validation():
    with pytest.raises(PreconditionError):
        TabulatedDecay.from_values([0.0, 1.0], [0.5, 0.8])  # increasing
    with pytest.raises(PreconditionError):
        TabulatedDecay.from_values([0.0, 1.0], [1.0, 0.0])  # zero value
    with pytest.raises(PreconditionError):
        TabulatedDecay.from_log_values([0.0, 1.0], [-math.inf, -math.inf])
    f = TabulatedDecay.from_values([0.0, 2.0], [1.0, 0.25])
    assert f.value(1.0) == 0.25
    assert f.breakpoints() == (0.0, 2.0)


def test_decay_limit_witnessed():
    assert decay_limit_witnessed(ParametricDecay(1.0, 0.5))
    assert decay_limit_witnessed(TabulatedDecay.from_values([0.0, 1.0], [1.0, 0.5]))
    assert not decay_limit_witnessed(TabulatedDecay.from_values([0.0, 9.0], [0.9, 0.9]))


def test_instability_witness_must_exceed_one():
    with pytest.raises(PreconditionError):
        InstabilityCertificate(N=ExpWitness(1.0, 0.0))
    with pytest.raises(PreconditionError):
        InstabilityCertificate(N=ExpWitness(0.9, 1.0))
    with pytest.raises(PreconditionError):
        InstabilityCertificate(N=TabulatedWitness.from_values([0.0], [1.0]))
    InstabilityCertificate(N=ExpWitness(1.0, 0.5))
    InstabilityCertificate(N=ExpWitness(1.01, 0.0))


def test_integral_witness_allows_exactly_one():
    IntegralInstabilityCertificate(M=ExpWitness(1.0, 0.0))
    IntegralInstabilityCertificate(M=TabulatedWitness.from_values([0.0], [1.0]))
    with pytest.raises(PreconditionError):
        IntegralInstabilityCertificate(M=TabulatedWitness.from_values([0.0], [0.99]))


def test_exp_certificate_needs_positive_rate():
    with pytest.raises(PreconditionError):
        ExpInstabilityCertificate(N=ExpWitness(1.01, 0.0), nu=0.0)
    with pytest.raises(PreconditionError):
        ExpInstabilityCertificate(N=ExpWitness(1.01, 0.0), nu=-1.0)


def test_decay_to_exponential():
    f = TabulatedDecay.from_values([0.0, 1.0], [1.0, 0.5])
    g = decay_to_exponential(f, 1.0)
    assert g.n_tilde == pytest.approx(2.0, rel=1e-15)
    assert g.omega == pytest.approx(math.log(2.0), rel=1e-15)
    with pytest.raises(PreconditionError):
        decay_to_exponential(f, 0.0)
    with pytest.raises(PreconditionError):
        decay_to_exponential(TabulatedDecay.from_values([0.0], [1.0]), 1.0)  # f(mu) = 1


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def test_decay_estimate_pure_exponential(short_times):
    xi = pure_exponential_model(-1.0)
    cert = estimate_decay(xi, grid_for(xi, short_times))
    assert cert.log_values == tuple(-t for t in short_times)
    assert cert.value(0.0) == 1.0
    assert cert.grid_hash == grid_for(xi, short_times).grid_hash


def test_decay_estimate_is_nonincreasing(sin_model, short_times):
    cert = estimate_decay(sin_model, grid_for(sin_model, short_times))
    assert cert.log_values[0] == 0.0
    assert all(b <= a for a, b in zip(cert.log_values, cert.log_values[1:]))


def test_instability_estimate_pexp3(pexp3_model, short_times):
    cert = estimate_instability(pexp3_model, grid_for(pexp3_model, short_times))
    for t in short_times:
        assert cert.N.value(t) == pytest.approx(1.01, rel=1e-14)


def test_exp_estimate_pexp3_is_exact(pexp3_model, full_times):
    cert = estimate_exp_instability(pexp3_model, grid_for(pexp3_model, full_times))
    assert isinstance(cert, ExpInstabilityCertificate)
    assert cert.nu == 3.0
    for t in full_times[::8]:
        assert cert.N.value(t) == pytest.approx(1.01, rel=1e-14)
    assert cert.growth_cap == 8.0


def test_exp_estimate_sin(sin_model, full_times, short_times):
    full = estimate_exp_instability(sin_model, grid_for(sin_model, full_times))
    assert isinstance(full, ExpInstabilityCertificate) and full.nu == 4.0
    limited = estimate_exp_instability(
        sin_model, grid_for(sin_model, full_times), nu_candidates=(1.0, 2.0, 3.0))
    assert isinstance(limited, ExpInstabilityCertificate) and limited.nu == 3.0
    coarse = estimate_exp_instability(sin_model, grid_for(sin_model, short_times))
    assert isinstance(coarse, ExpInstabilityCertificate) and coarse.nu == 4.0


def test_exp_estimate_diag(diag_model, full_times):
    cert = estimate_exp_instability(diag_model, grid_for(diag_model, full_times))
    assert isinstance(cert, ExpInstabilityCertificate)
    assert cert.nu == 0.25


def test_exp_estimate_contracting_model_has_no_certificate(full_times):
    xi = pure_exponential_model(-1.0)
    out = estimate_exp_instability(xi, grid_for(xi, full_times))
    assert isinstance(out, NoCertificate)
    assert out.property_name == "exp-instability"
    assert out.details["realized_rate"] == -1.0
    assert "realized growth rate" in out.reason
    assert out.details["candidates"][0] == 0.25


def test_exp_estimate_growth_cap_branch(sin_model, full_times):
    out = estimate_exp_instability(sin_model, grid_for(sin_model, full_times), growth_cap=0.01)
    assert isinstance(out, NoCertificate)
    assert "growth_cap" in out.reason
    assert out.details["envelope_slopes"]  # at least one candidate was rate-covered


def test_integral_estimate_pexp3(pexp3_model, short_times):
    cert = estimate_integral_instability(pexp3_model, grid_for(pexp3_model, short_times))
    for t in short_times:
        assert cert.M.value(t) == 1.0
    assert cert.quad == QuadratureConfig()


def test_estimator_validation(pexp3_model, short_times):
    g = grid_for(pexp3_model, short_times)
    with pytest.raises(PreconditionError):
        estimate_instability(pexp3_model, g, headroom=0.0)
    with pytest.raises(PreconditionError):
        estimate_exp_instability(pexp3_model, g, growth_cap=0.0)
    with pytest.raises(PreconditionError):
        estimate_exp_instability(pexp3_model, g, nu_candidates=(2.0, 1.0))
    with pytest.raises(PreconditionError):
        estimate_exp_instability(pexp3_model, g, nu_candidates=(0.0, 1.0))
    # an empty candidate tuple falls back to the default ladder
    fell_back = estimate_exp_instability(pexp3_model, g, nu_candidates=())
    assert isinstance(fell_back, ExpInstabilityCertificate)
    empty = SampleGrid.create([], [], [])
    with pytest.raises(PreconditionError, match="grid nonempty"):
        estimate_decay(pexp3_model, empty)


def test_integral_estimate_needs_measurability(short_times):
    import dataclasses

    xi = pure_exponential_model(3.0)
    blocked = dataclasses.replace(xi, strongly_measurable=False)
    with pytest.raises(PreconditionError, match="strongly measurable"):
        estimate_integral_instability(blocked, grid_for(blocked, short_times))


# ---------------------------------------------------------------------------
# Checkers
# ---------------------------------------------------------------------------


def test_round_trip_is_exact_at_zero_tolerance(sin_model, diag_model, pexp3_model, short_times):
    for xi in (sin_model, diag_model, pexp3_model):
        g = grid_for(xi, short_times)
        assert check_decay(xi, estimate_decay(xi, g), g, tol=0.0).passed
        assert check_instability(xi, estimate_instability(xi, g), g, tol=0.0).passed
        exp_cert = estimate_exp_instability(xi, g)
        assert isinstance(exp_cert, ExpInstabilityCertificate)
        assert check_exp_instability(xi, exp_cert, g, tol=0.0).passed
        assert check_integral_instability(
            xi, estimate_integral_instability(xi, g), g, tol=0.0).passed


def test_checkers_reject_wrong_certificate_kind(pexp3_model, short_times):
    g = grid_for(pexp3_model, short_times)
    inst = InstabilityCertificate(N=ExpWitness(2.0, 0.0))
    decay = ParametricDecay(1.0, 1.0)
    with pytest.raises(PreconditionError):
        check_decay(pexp3_model, inst, g)
    with pytest.raises(PreconditionError):
        check_instability(pexp3_model, decay, g)
    with pytest.raises(PreconditionError):
        check_exp_instability(pexp3_model, inst, g)
    with pytest.raises(PreconditionError):
        check_integral_instability(pexp3_model, inst, g)


def test_flat_witness_fails_on_contracting_model(short_times):
    # ||Phi(t, t0)v|| = e^{-5 (t - t0)} ||v||, so N = 2 stops covering the
    # inverse ratio as soon as 5 (t - t0) > log 2.
    xi = pure_exponential_model(-5.0)
    g = grid_for(xi, short_times)
    report = check_instability(xi, InstabilityCertificate(N=ExpWitness(2.0, 0.0)), g)
    assert not report.passed
    worst = math.log(2.0) - 5.0 * (short_times[-1] - short_times[0])
    assert report.worst_margin == pytest.approx(worst, rel=1e-12)


def test_unit_integral_witness_fails_on_contracting_model(short_times):
    xi = pure_exponential_model(-1.0)
    g = SampleGrid.create([0.0, 2.0], [Trivial(0.0)], [(1.0,)])
    cert = IntegralInstabilityCertificate(M=ExpWitness(1.0, 0.0))
    rows = []
    report = check_integral_instability(
        xi, cert, g, margin_sink=lambda *row: rows.append(row))
    assert not report.passed
    got = [r for r in rows if r[0] == 2.0 and r[2] == 0.0]
    # integral over [0, 2] is (1 - e^{-2}); the norm there is e^{-2}
    expected = -math.log((1.0 - math.exp(-2.0)) * math.exp(2.0))
    assert got[0][5] == pytest.approx(expected, abs=1e-9)


def test_decay_rows_use_shifted_start(pexp3_model):
    g = SampleGrid.create([0.0, 1.0], [Trivial(0.0)], [(1.0,)])
    rows = []
    check_decay(pexp3_model, ParametricDecay(1.0, 10.0), g,
                margin_sink=lambda *row: rows.append(row))
    assert (1.0, 1.0, 1.0) in {(t, s, t0) for t, s, t0, *_ in rows}
    assert (2.0, 1.0, 1.0) in {(t, s, t0) for t, s, t0, *_ in rows}


def test_exp_checker_counts_all_triples(pexp3_model):
    ts = [0.0, 1.0, 2.0, 3.0]
    g = SampleGrid.create(ts, [Trivial(0.0)], [(1.0,)])
    cert = ExpInstabilityCertificate(N=ExpWitness(1.01, 0.0), nu=3.0)
    report = check_exp_instability(pexp3_model, cert, g)
    assert report.samples_checked == 20  # ordered triples from 4 times
    assert report.passed


def test_scale_invariance_of_fitted_certificates(sin_model, short_times):
    from cocycle_lab import default_base_points

    for c in (0.125, 3.0, 117.0):
        base = SampleGrid.create(short_times, default_base_points(sin_model), [(1.0,), (-1.0,)])
        scaled = SampleGrid.create(
            short_times, default_base_points(sin_model), [(c,), (-c,)])
        f1 = estimate_decay(sin_model, base)
        f2 = estimate_decay(sin_model, scaled)
        assert np.allclose(f1.log_values, f2.log_values, atol=1e-12, rtol=0.0)
        n1 = estimate_instability(sin_model, base)
        n2 = estimate_instability(sin_model, scaled)
        assert np.allclose(n1.N.log_values, n2.N.log_values, atol=1e-12, rtol=0.0)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


ROUND_TRIP_CASES = [
    ParametricDecay(2.5, 0.75, grid_hash="abc"),
    TabulatedDecay.from_values([0.0, 1.0, 2.0], [1.0, 0.5, 0.25], grid_hash="abc"),
    InstabilityCertificate(N=ExpWitness(1.5, 0.25), grid_hash="g"),
    InstabilityCertificate(N=TabulatedWitness.from_values([0.0, 4.0], [1.01, 7.0])),
    ExpInstabilityCertificate(N=ExpWitness(1.01, 0.0), nu=3.0, growth_cap=8.0),
    ExpInstabilityCertificate(
        N=TabulatedWitness.from_values([0.0, 1.0], [1.5, 2.5]), nu=0.25),
    IntegralInstabilityCertificate(M=ExpWitness(1.0, 0.5), quad=QuadratureConfig()),
    IntegralInstabilityCertificate(
        M=TabulatedWitness.from_values([0.0, 2.0], [1.0, 3.0]), quad=None),
    NoCertificate(property_name="exp-instability", reason="nothing admissible",
                  details={"realized_rate": -1.0}),
]


@pytest.mark.parametrize("cert", ROUND_TRIP_CASES, ids=lambda c: type(c).__name__)
def test_serialization_round_trip(cert):
    doc = certificate_to_json_dict(cert)
    back = certificate_from_json_dict(doc)
    assert back == cert
    import json

    json.dumps(doc)


def test_tool_version_preserved_on_load():
    doc = certificate_to_json_dict(ParametricDecay(2.0, 1.0))
    doc["tool_version"] = "0.0.1-test"
    assert certificate_from_json_dict(doc).tool_version == "0.0.1-test"


def test_deserialization_rejects_malformed_documents():
    good = certificate_to_json_dict(ParametricDecay(2.0, 1.0))
    cases = []
    stray = dict(good)
    stray["extra"] = 1
    cases.append(stray)
    missing = dict(good)
    del missing["omega"]
    cases.append(missing)
    boolean = dict(good)
    boolean["n_tilde"] = True
    cases.append(boolean)
    cases.append({**good, "kind": "mystery"})
    cases.append({**good, "form": "spline"})
    cases.append("not a dict")
    cases.append({**certificate_to_json_dict(
        InstabilityCertificate(N=ExpWitness(2.0, 0.0))), "N": {"coef": 2.0}})
    tab = certificate_to_json_dict(
        TabulatedDecay.from_values([0.0, 1.0], [1.0, 0.5]))
    cases.append({**tab, "values": [1.0, "x"]})
    cases.append({**tab, "values": [0.5, 1.0]})  # violates monotonicity
    for doc in cases:
        with pytest.raises(PreconditionError):
            certificate_from_json_dict(doc)


def test_no_certificate_serialization_keeps_details():
    out = NoCertificate(property_name="exp-instability", reason="why not",
                        grid_hash="h", details={"candidates": [0.25]})
    doc = certificate_to_json_dict(out)
    assert doc["kind"] == "no_certificate"
    back = certificate_from_json_dict(doc)
    assert back.details == {"candidates": [0.25]}
    assert back.grid_hash == "h"


@given(st.floats(0.05, 20.0), st.floats(0.1, 3.0))
@settings(max_examples=50)
def test_parametric_json_preserves_values_exactly(n_tilde, omega):
    cert = ParametricDecay(1.0 + n_tilde, omega)
    back = certificate_from_json_dict(certificate_to_json_dict(cert))
    assert back.n_tilde == cert.n_tilde
    assert back.omega == cert.omega
