"""Material card calibration: hyperelastic table, unloading family,
plasticity anchors, softening fit, relaxation series."""

import numpy as np
import pytest

from morphgrid.dma import CurveKind, DmaCurve, FrequencySweep
from morphgrid.errors import (
    DegenerateFamily,
    InsufficientData,
    InvalidDocument,
    NegativeStrain,
    NonMonotoneAnchors,
    OutOfCalibrationRange,
)
from morphgrid.materials import (
    CFPLA_ALPHA_T,
    CFPLA_POISSON,
    DamageParams,
    Interpolation,
    MarlowCurve,
    MaterialCard,
    PLA_ALPHA_T,
    PLA_POISSON,
    PronySeries,
    UnloadingFamily,
    build_unloading_family,
    calibrate_card,
    card_from_dict,
    card_to_dict,
    check_viscoelastic_dominance,
    eval_damaged_stress,
    eval_uniaxial_stress,
    extract_plasticity_table,
    fit_damage_params,
    fit_prony,
    loading_secant_modulus,
    long_term_modulus_fraction,
    recoverable_strain,
    select_unloading_curve,
    unloading_secant_modulus,
)

EXPECTED_PLASTICITY = (
    (0.079267, 0.004998),
    (0.132095, 0.015219),
    (0.170461, 0.03359),
    (0.203041, 0.055328),
)


# --- hyperelastic table ---------------------------------------------------------


def test_stress_exact_at_every_knot(pla_card):
    marlow = pla_card.marlow
    for e, s in zip(marlow.loading.strain, marlow.loading.stress):
        assert eval_uniaxial_stress(marlow, float(e)) == s


def test_stress_examples(pla_card):
    marlow = pla_card.marlow
    assert eval_uniaxial_stress(marlow, 0.0) == 0.0
    assert eval_uniaxial_stress(marlow, 0.232) == 0.204067
    assert eval_uniaxial_stress(marlow, 0.0845246) == 0.115441


def test_stress_linear_extrapolation(pla_card):
    marlow = pla_card.marlow
    x, y = marlow.loading.strain, marlow.loading.stress
    slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
    probe = 1.1 * x[-1]
    assert eval_uniaxial_stress(marlow, probe) == pytest.approx(
        y[-1] + slope * (probe - x[-1]), rel=1e-12)
    with pytest.raises(ValueError):
        eval_uniaxial_stress(marlow, 1.3 * x[-1])


def test_stress_rejects_negative_strain(pla_card):
    with pytest.raises(NegativeStrain):
        eval_uniaxial_stress(pla_card.marlow, -0.01)


def test_stress_monotone_and_continuous(pla_card, pla_loading):
    for interp in (Interpolation.LINEAR, Interpolation.MONOTONE_CUBIC):
        marlow = MarlowCurve(loading=pla_loading, interpolation=interp)
        grid = np.linspace(0.0, 1.2 * marlow.max_strain, 4001)
        values = np.array([marlow.stress_at(g) for g in grid])
        assert (np.diff(values) >= -1e-12).all()
        assert np.max(np.abs(np.diff(values))) < 0.002  # no jumps on a fine grid


def test_monotone_cubic_exact_at_knots(pla_loading):
    marlow = MarlowCurve(loading=pla_loading, interpolation=Interpolation.MONOTONE_CUBIC)
    for e, s in zip(pla_loading.strain, pla_loading.stress):
        assert marlow.stress_at(float(e)) == pytest.approx(s, abs=1e-12)


def test_strain_at_stress_inverts_the_table(pla_card):
    marlow = pla_card.marlow
    for e, s in zip(marlow.loading.strain, marlow.loading.stress):
        assert marlow.strain_at_stress(float(s)) == pytest.approx(e, abs=1e-12)


def test_energy_matches_quadrature(pla_card):
    from scipy.integrate import quad

    marlow = pla_card.marlow
    knots = np.asarray(marlow.loading.strain)
    for probe in (0.05, 0.12, 0.232):
        cuts = np.concatenate([knots[knots < probe], [probe]])
        ref = sum(quad(lambda e: marlow.stress_at(e), a, b)[0]
                  for a, b in zip(cuts[:-1], cuts[1:]))
        assert marlow.energy_at(probe) == pytest.approx(ref, rel=1e-9)


# --- unloading family ------------------------------------------------------------


def test_select_exact_member(pla_card, pla_unloading_curves):
    curve = select_unloading_curve(pla_card.unloading, 0.203041)
    np.testing.assert_array_equal(curve.strain, pla_unloading_curves[0].strain)
    np.testing.assert_array_equal(curve.stress, pla_unloading_curves[0].stress)
    low = select_unloading_curve(pla_card.unloading, 0.079267)
    assert low.strain[-1] == 0.004998


def test_select_outside_span(pla_card):
    with pytest.raises(OutOfCalibrationRange):
        select_unloading_curve(pla_card.unloading, 0.30)
    with pytest.raises(OutOfCalibrationRange):
        select_unloading_curve(pla_card.unloading, 0.01)


def test_select_interpolated_curve_sits_between_members(pla_card):
    sigma0 = 0.150
    curve = select_unloading_curve(pla_card.unloading, sigma0)
    assert curve.kind is CurveKind.UNLOADING
    assert curve.stress[0] == pytest.approx(sigma0, abs=1e-12)
    assert curve.stress[-1] == 0.0
    lo = select_unloading_curve(pla_card.unloading, 0.132095)
    hi = select_unloading_curve(pla_card.unloading, 0.170461)
    assert lo.strain[-1] < curve.strain[-1] < hi.strain[-1]
    assert lo.strain[0] < curve.strain[0] < hi.strain[0]


def test_family_rejects_non_monotone_anchors(pla_unloading_curves):
    shrunk = DmaCurve(
        strain=pla_unloading_curves[0].strain * 0.05,
        stress=pla_unloading_curves[0].stress,
        kind=CurveKind.UNLOADING,
    )
    with pytest.raises(NonMonotoneAnchors):
        build_unloading_family([shrunk] + pla_unloading_curves[1:])


def test_family_validates_peaks_against_loading_curve(pla_card, pla_unloading_curves):
    inflated = DmaCurve(
        strain=pla_unloading_curves[0].strain,
        stress=pla_unloading_curves[0].stress * 1.5,
        kind=CurveKind.UNLOADING,
    )
    with pytest.raises(ValueError, match="off the loading curve"):
        build_unloading_family([inflated], marlow=pla_card.marlow)


# --- recoverable strain and plasticity --------------------------------------------


def test_recoverable_strain_examples(pla_card):
    assert recoverable_strain(pla_card, 0.203041) == pytest.approx(0.176249, abs=1e-6)
    assert recoverable_strain(pla_card, 0.079267) == pytest.approx(0.044454, abs=1e-6)
    assert recoverable_strain(pla_card, 0.0) == 0.0


def test_recoverable_strain_linear_card_is_elastic_release(pla_card, cfpla_card):
    # A card without calibrated unloading curves releases sigma0 elastically.
    modulus = cfpla_card.marlow.initial_tangent()
    sigma = 0.132095
    assert recoverable_strain(cfpla_card, sigma) == pytest.approx(sigma / modulus, rel=1e-12)
    assert recoverable_strain(cfpla_card, 0.0) == 0.0
    # Elastic release through a stiff constraint is tiny next to the
    # plasticity-dominated release of the calibrated actuator material.
    assert recoverable_strain(cfpla_card, sigma) < 0.05 * recoverable_strain(pla_card, sigma)
    # The unloading secant of a linear card is the loading tangent itself.
    assert unloading_secant_modulus(cfpla_card, sigma) == pytest.approx(modulus, rel=1e-12)


def test_recoverable_strain_monotone_over_span(pla_card):
    lo, hi = pla_card.unloading.span
    values = [recoverable_strain(pla_card, s) for s in np.linspace(lo, hi, 200)]
    assert (np.diff(values) >= -1e-12).all()


def test_plasticity_table_rows(pla_card):
    assert pla_card.plasticity.rows == EXPECTED_PLASTICITY


def test_plasticity_table_sorted_regardless_of_input_order(pla_unloading_curves):
    shuffled = [pla_unloading_curves[2], pla_unloading_curves[0],
                pla_unloading_curves[3], pla_unloading_curves[1]]
    table = extract_plasticity_table(build_unloading_family(shuffled))
    assert table.rows == EXPECTED_PLASTICITY


def test_plasticity_agrees_with_selected_curve_anchor(pla_card):
    for sigma0, plastic in pla_card.plasticity.rows:
        curve = select_unloading_curve(pla_card.unloading, sigma0)
        assert abs(float(curve.strain[-1]) - plastic) < 1e-9


def test_plasticity_empty_family():
    with pytest.raises(DegenerateFamily):
        extract_plasticity_table(UnloadingFamily(members=()))


# --- softening (damage) fit -------------------------------------------------------


def _synthetic_family(marlow, params):
    curves = []
    for peak_strain, anchor in ((0.10, 0.01), (0.16, 0.025), (0.22, 0.05)):
        strain = np.linspace(peak_strain, anchor, 40)
        stress = eval_damaged_stress(marlow, params, strain, peak_strain, anchor)
        curves.append(DmaCurve(strain=strain, stress=np.maximum(stress, 0.0),
                               kind=CurveKind.UNLOADING))
    return build_unloading_family(curves)


def test_damage_fit_recovers_known_parameters(pla_card):
    truth = DamageParams(r=2.0, m=0.05, beta=0.1)
    family = _synthetic_family(pla_card.marlow, truth)
    fitted = fit_damage_params(pla_card.marlow, family)
    assert fitted.r == pytest.approx(truth.r, rel=0.02)
    assert fitted.m == pytest.approx(truth.m, rel=0.02)
    assert fitted.beta == pytest.approx(truth.beta, rel=0.02)


def test_damage_fit_on_calibration_family_is_tight(pla_card):
    fitted = fit_damage_params(pla_card.marlow, pla_card.unloading)
    assert fitted.fit_rms_mpa < 0.01


def test_damage_fit_needs_two_members(pla_card, pla_unloading_curves):
    family = build_unloading_family(pla_unloading_curves[:1])
    with pytest.raises(DegenerateFamily):
        fit_damage_params(pla_card.marlow, family)


# --- relaxation series -------------------------------------------------------------


def test_prony_fit_quality_on_fixture(pla_card):
    prony = pla_card.prony
    assert prony is not None
    assert len(prony.terms) == 8
    assert prony.fit_rms_storage < 0.10
    assert prony.fit_rms_loss < 0.10


def test_prony_invariants(pla_card, pla_sweep):
    prony = pla_card.prony
    assert prony.instantaneous_modulus >= prony.e_infinity
    freqs = np.geomspace(pla_sweep.freq_hz[0], pla_sweep.freq_hz[-1], 200)
    storage = prony.storage_modulus(freqs)
    assert (np.diff(storage) >= -1e-9).all()


def test_prony_single_term_recovery(pla_sweep):
    e_inf, e1, tau = 2.0, 15.0, 0.02
    truth = PronySeries(terms=((e1, tau),), e_infinity=e_inf)
    storage = truth.storage_modulus(pla_sweep.freq_hz)
    loss = truth.loss_modulus(pla_sweep.freq_hz)
    sweep = FrequencySweep(
        freq_hz=pla_sweep.freq_hz, storage_mpa=storage, loss_mpa=loss,
        tan_delta=loss / storage, pre_strain=np.full_like(storage, 0.0095),
    )
    fitted = fit_prony(sweep, n_terms=1)
    assert fitted.e_infinity == pytest.approx(e_inf, rel=0.03)
    assert fitted.terms[0][0] == pytest.approx(e1, rel=0.03)
    assert fitted.terms[0][1] == pytest.approx(tau, rel=0.03)


def test_prony_tau_refinement_improves_fit(pla_sweep):
    fixed = fit_prony(pla_sweep, n_terms=8, refine_taus=False)
    refined = fit_prony(pla_sweep, n_terms=8)
    assert max(refined.fit_rms_storage, refined.fit_rms_loss) \
        < max(fixed.fit_rms_storage, fixed.fit_rms_loss)


def test_prony_insufficient_data(pla_sweep):
    one_row = FrequencySweep(
        freq_hz=pla_sweep.freq_hz[:1], storage_mpa=pla_sweep.storage_mpa[:1],
        loss_mpa=pla_sweep.loss_mpa[:1], tan_delta=pla_sweep.tan_delta[:1],
        pre_strain=pla_sweep.pre_strain[:1],
    )
    with pytest.raises(InsufficientData):
        fit_prony(one_row, n_terms=1)


def test_viscoelastic_dominance(pla_sweep, cfpla_sweep):
    assert check_viscoelastic_dominance(pla_sweep) is True
    assert pla_sweep.max_tan_delta == pytest.approx(1.20915, abs=1e-5)
    assert check_viscoelastic_dominance(cfpla_sweep) is False
    assert cfpla_sweep.max_tan_delta == pytest.approx(0.406487, abs=1e-6)


def test_dominance_of_pure_elastic_sweep():
    sweep = FrequencySweep(
        freq_hz=[0.1, 1.0, 10.0], storage_mpa=[50.0, 50.0, 50.0],
        loss_mpa=[0.0, 0.0, 0.0], tan_delta=[0.0, 0.0, 0.0],
        pre_strain=[0.0095] * 3,
    )
    assert check_viscoelastic_dominance(sweep) is False


# --- assembled cards ---------------------------------------------------------------


def test_pla_card_is_viscoelastic_cfpla_is_not(pla_card, cfpla_card):
    assert pla_card.viscoelastic_enabled is True
    assert pla_card.prony is not None
    assert cfpla_card.viscoelastic_enabled is False
    assert cfpla_card.prony is None
    assert long_term_modulus_fraction(cfpla_card) == 1.0
    assert 0.0 < long_term_modulus_fraction(pla_card) < 1.0


def test_card_constants_match_published_values(pla_card, cfpla_card):
    assert (pla_card.alpha_t, pla_card.poisson) == (9.17e-4, 0.419)
    assert (cfpla_card.alpha_t, cfpla_card.poisson) == (9.97e-5, 0.359)
    assert (PLA_ALPHA_T, PLA_POISSON) == (9.17e-4, 0.419)
    assert (CFPLA_ALPHA_T, CFPLA_POISSON) == (9.97e-5, 0.359)


def test_linear_card_modulus(cfpla_card, cfpla_sweep):
    assert cfpla_card.marlow.initial_tangent() == pytest.approx(
        float(cfpla_sweep.storage_mpa[0]), rel=1e-12)


def test_card_json_round_trip(pla_card, cfpla_card):
    for card in (pla_card, cfpla_card):
        doc = card_to_dict(card)
        again = card_from_dict(doc)
        assert card_to_dict(again) == doc


def test_card_from_dict_rejects_wrong_kind(pla_card):
    doc = card_to_dict(pla_card)
    doc["kind"] = "grid_design"
    with pytest.raises(InvalidDocument):
        card_from_dict(doc)


def test_card_from_dict_rejects_unknown_version(pla_card):
    doc = card_to_dict(pla_card)
    doc["format_version"] = 99
    with pytest.raises(InvalidDocument):
        card_from_dict(doc)


def test_card_invariants(pla_card):
    with pytest.raises(ValueError):
        MaterialCard(name="x", marlow=pla_card.marlow, unloading=pla_card.unloading,
                     alpha_t=PLA_ALPHA_T, poisson=0.6)
    with pytest.raises(ValueError):
        MaterialCard(name="x", marlow=pla_card.marlow, unloading=pla_card.unloading,
                     alpha_t=PLA_ALPHA_T, poisson=PLA_POISSON,
                     viscoelastic_enabled=True)


def test_calibrate_without_sweep_is_elastic(pla_loading, pla_unloading_curves):
    card = calibrate_card("pla-dry", pla_loading, pla_unloading_curves,
                          alpha_t=PLA_ALPHA_T, poisson=PLA_POISSON)
    assert card.viscoelastic_enabled is False
    assert card.prony is None
    assert card.plasticity.rows == EXPECTED_PLASTICITY


def test_calibrate_with_damage_fit(pla_loading, pla_unloading_curves):
    card = calibrate_card("pla-damage", pla_loading, pla_unloading_curves,
                          alpha_t=PLA_ALPHA_T, poisson=PLA_POISSON, fit_damage=True)
    assert card.damage is not None
    assert card.damage.fit_rms_mpa < 0.01


# --- secant moduli -----------------------------------------------------------------


def test_unloading_secant_matches_hand_computation(pla_card, pla_unloading_curves):
    curve = pla_unloading_curves[0]  # sigma0 = 0.203041
    target = 0.2 * float(curve.stress[0])
    strain_at_target = float(np.interp(target, curve.stress[::-1], curve.strain[::-1]))
    expected = target / (strain_at_target - float(curve.strain[-1]))
    assert unloading_secant_modulus(pla_card, 0.203041) == pytest.approx(expected, rel=1e-12)


def test_unloading_secant_at_zero_stress_is_initial_tangent(pla_card):
    assert unloading_secant_modulus(pla_card, 0.0) == pla_card.marlow.initial_tangent()


def test_loading_secant_matches_hand_computation(pla_card):
    assert loading_secant_modulus(pla_card, 0.115441) == pytest.approx(
        0.115441 / 0.0845246, rel=1e-12)
    assert loading_secant_modulus(pla_card, 0.0) == pla_card.marlow.initial_tangent()
