"""Constitutive description of a printed block material.

A material card bundles everything the structural model needs about one
printed block type: the tabular hyperelastic loading curve, the family of
unloading curves indexed by embedded residual stress, the plastic anchor
table, optional stress-softening (damage) parameters, an optional
frequency-domain viscoelastic series, and the thermal/elastic constants.

The card is calibrated once from DMA records and then queried by the unit
and grid solvers: stresses and secant moduli from the curves, recoverable
shrinkage from the unloading family, long-term modulus scaling from the
viscoelastic series.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares, nnls
from scipy.special import erf

from .dma import CurveKind, DmaCurve, FrequencySweep
from .errors import (
    DegenerateFamily,
    FitDivergence,
    InsufficientData,
    InvalidDocument,
    NegativeStrain,
    NonMonotoneAnchors,
    OutOfCalibrationRange,
)

FORMAT_VERSION = 1

# Thermal expansion and Poisson constants measured at the 80 degC trigger
# condition for the two stock materials.
PLA_ALPHA_T = 9.17e-4
PLA_POISSON = 0.419
CFPLA_ALPHA_T = 9.97e-5
CFPLA_POISSON = 0.359

#: Default mass density (kg/m^3) for PLA-based filaments.
DEFAULT_DENSITY = 1240.0

#: Fraction of the stress range used for released-state secant moduli.
SECANT_STRESS_FRACTION = 0.2


class Interpolation(str, enum.Enum):
    LINEAR = "linear"
    MONOTONE_CUBIC = "monotone_cubic"


@dataclass(frozen=True, eq=False)
class MarlowCurve:
    """Tabular first-invariant hyperelastic law: the main loading curve.

    Evaluation reproduces the table exactly at its knots, interpolates
    between them (piecewise linear by default, monotone cubic optionally),
    and extrapolates linearly from the last segment up to 1.2x the maximum
    tabulated strain.
    """

    loading: DmaCurve
    interpolation: Interpolation = Interpolation.LINEAR

    def __post_init__(self):
        c = self.loading
        if not c.starts_at_origin(tol=1e-9):
            raise ValueError("main loading curve must start at (0, 0)")
        if not (np.diff(c.strain) > 0).all():
            raise ValueError("loading strains must be strictly increasing")
        if not (np.diff(c.stress) > 0).all():
            raise ValueError("loading stresses must be strictly increasing")
        if self.interpolation is Interpolation.MONOTONE_CUBIC:
            interp = PchipInterpolator(c.strain, c.stress, extrapolate=False)
            object.__setattr__(self, "_pchip", interp)
            object.__setattr__(self, "_pchip_energy", interp.antiderivative())
        # exact cumulative integral of the piecewise-linear table
        cum = np.concatenate([
            [0.0],
            np.cumsum(0.5 * (c.stress[1:] + c.stress[:-1]) * np.diff(c.strain)),
        ])
        object.__setattr__(self, "_cum_energy", cum)

    @property
    def max_strain(self) -> float:
        return float(self.loading.strain[-1])

    @property
    def peak_stress(self) -> float:
        return float(self.loading.stress[-1])

    def _check_domain(self, strain: np.ndarray) -> None:
        if (strain < 0).any():
            raise NegativeStrain("strain must be >= 0")
        if (strain > 1.2 * self.max_strain + 1e-12).any():
            raise ValueError(
                f"strain beyond the 1.2x extrapolation limit ({1.2 * self.max_strain:.4g})"
            )

    def stress_at(self, strain) -> float | np.ndarray:
        """Stress (MPa) at strain; exact at knots, linear beyond the table."""
        e = np.asarray(strain, dtype=float)
        self._check_domain(e)
        x, y = self.loading.strain, self.loading.stress
        if self.interpolation is Interpolation.MONOTONE_CUBIC:
            out = np.where(e <= x[-1], np.nan_to_num(self._pchip(np.minimum(e, x[-1]))), 0.0)
        else:
            out = np.interp(e, x, y)
        slope = (y[-1] - y[-2]) / (x[-1] - x[-2])
        out = np.where(e > x[-1], y[-1] + slope * (e - x[-1]), out)
        return float(out) if np.ndim(strain) == 0 else out

    def strain_at_stress(self, stress) -> float | np.ndarray:
        """Inverse of :meth:`stress_at` (the table is strictly monotone)."""
        s = np.asarray(stress, dtype=float)
        if (s < 0).any():
            raise NegativeStrain("stress must be >= 0")
        x, y = self.loading.strain, self.loading.stress
        out = np.interp(s, y, x)
        slope = (x[-1] - x[-2]) / (y[-1] - y[-2])
        out = np.where(s > y[-1], x[-1] + slope * (s - y[-1]), out)
        return float(out) if np.ndim(stress) == 0 else out

    def energy_at(self, strain) -> float | np.ndarray:
        """Strain energy density (MPa): integral of stress over strain."""
        e = np.asarray(strain, dtype=float)
        self._check_domain(e)
        x, y = self.loading.strain, self.loading.stress
        if self.interpolation is Interpolation.MONOTONE_CUBIC:
            inside = self._pchip_energy(np.minimum(e, x[-1]))
            top = np.asarray(self._pchip_energy(x[-1]))
        else:
            i = np.clip(np.searchsorted(x, e, side="right") - 1, 0, x.size - 2)
            de = e - x[i]
            slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i])
            inside = self._cum_energy[i] + y[i] * de + 0.5 * slope * de * de
            top = self._cum_energy[-1]
        slope_end = (y[-1] - y[-2]) / (x[-1] - x[-2])
        over = e - x[-1]
        beyond = top + y[-1] * over + 0.5 * slope_end * over * over
        out = np.where(e > x[-1], beyond, inside)
        return float(out) if np.ndim(strain) == 0 else out

    def initial_tangent(self) -> float:
        x, y = self.loading.strain, self.loading.stress
        return float((y[1] - y[0]) / (x[1] - x[0]))


def eval_uniaxial_stress(marlow: MarlowCurve, strain) -> float | np.ndarray:
    """Uniaxial tensile stress of the virgin material at a given strain."""
    return marlow.stress_at(strain)


@dataclass(frozen=True, eq=False)
class UnloadingMember:
    """One calibrated unloading curve: residual stress label, curve, anchor."""

    sigma0: float
    curve: DmaCurve
    anchor_strain: float

    def __post_init__(self):
        if self.curve.kind is not CurveKind.UNLOADING:
            raise ValueError("member curve must be an unloading curve")
        if abs(self.curve.stress[-1]) > 1e-9:
            raise ValueError("unloading curve must end at zero stress")
        if abs(self.anchor_strain - float(self.curve.strain[-1])) > 1e-12:
            raise ValueError("anchor_strain must equal the curve's zero-stress strain")


class FamilyMode(str, enum.Enum):
    TABULAR = "tabular"
    OGDEN_ROXBURGH = "ogden_roxburgh"


@dataclass(frozen=True, eq=False)
class UnloadingFamily:
    """Unloading curves indexed by initial residual stress, sorted ascending."""

    members: tuple[UnloadingMember, ...]
    mode: FamilyMode = FamilyMode.TABULAR

    def __post_init__(self):
        object.__setattr__(
            self, "members",
            tuple(sorted(self.members, key=lambda m: m.sigma0)),
        )
        sig = [m.sigma0 for m in self.members]
        anchors = [m.anchor_strain for m in self.members]
        if any(b <= a for a, b in zip(sig, sig[1:])):
            raise ValueError("member sigma0 values must be distinct")
        if any(b <= a for a, b in zip(anchors, anchors[1:])):
            raise NonMonotoneAnchors("anchor strains must increase with sigma0")

    @property
    def span(self) -> tuple[float, float]:
        if not self.members:
            raise DegenerateFamily("empty unloading family")
        return self.members[0].sigma0, self.members[-1].sigma0

    def validate_against(self, marlow: MarlowCurve, rel_tol: float = 0.005) -> None:
        """Check every member's peak point sits on the loading curve."""
        for m in self.members:
            expected = marlow.stress_at(min(float(m.curve.strain[0]), 1.2 * marlow.max_strain))
            actual = float(m.curve.stress[0])
            if abs(expected - actual) > rel_tol * max(actual, 1e-12):
                raise ValueError(
                    f"member sigma0={m.sigma0}: peak point off the loading curve "
                    f"({actual:.6g} vs {expected:.6g} MPa)"
                )


def build_unloading_family(curves: list[DmaCurve], marlow: MarlowCurve | None = None,
                           ) -> UnloadingFamily:
    """Assemble a family from raw unloading curves.

    Each curve's nominal residual stress is its peak (first) stress and its
    anchor is its zero-stress strain.  If ``marlow`` is given, each peak
    point is checked to lie on the loading curve within 0.5% stress.
    """
    members = []
    for c in curves:
        if c.kind is not CurveKind.UNLOADING:
            raise ValueError("expected unloading curves")
        members.append(UnloadingMember(
            sigma0=float(c.stress[0]), curve=c, anchor_strain=float(c.strain[-1]),
        ))
    family = UnloadingFamily(members=tuple(members))
    if marlow is not None:
        family.validate_against(marlow)
    return family


def _member_strain_of_fraction(member: UnloadingMember, fractions: np.ndarray) -> np.ndarray:
    """Strain along one member curve at given stress fractions of its peak."""
    s = member.curve.stress / member.curve.stress[0]
    e = member.curve.strain
    # unloading runs peak->anchor, so fraction decreases; flip for interp
    return np.interp(fractions, s[::-1], e[::-1])


def select_unloading_curve(family: UnloadingFamily, sigma0: float) -> DmaCurve:
    """Unloading curve for a given residual stress.

    Exact members (within 1e-6 MPa) are returned as-is.  Between members the
    curve is blended pointwise: each bracketing member is re-parameterized on
    its normalized stress fraction (stress over peak stress), strains are
    linearly interpolated in sigma0 on the union fraction grid, and stresses
    are the fractions scaled by the requested sigma0.

    Raises
    ------
    OutOfCalibrationRange
        ``sigma0`` outside the family's calibrated span.
    """
    if not family.members:
        raise DegenerateFamily("empty unloading family")
    for m in family.members:
        if abs(m.sigma0 - sigma0) <= 1e-6:
            return m.curve
    lo, hi = family.span
    if not (lo <= sigma0 <= hi):
        raise OutOfCalibrationRange(
            f"sigma0 {sigma0:.6g} MPa outside calibrated span [{lo:.6g}, {hi:.6g}]"
        )
    upper_i = next(i for i, m in enumerate(family.members) if m.sigma0 >= sigma0)
    a, b = family.members[upper_i - 1], family.members[upper_i]
    w = (sigma0 - a.sigma0) / (b.sigma0 - a.sigma0)
    frac_a = a.curve.stress / a.curve.stress[0]
    frac_b = b.curve.stress / b.curve.stress[0]
    grid = np.unique(np.concatenate([frac_a, frac_b]))[::-1]  # 1 -> 0
    strain = (1 - w) * _member_strain_of_fraction(a, grid) \
        + w * _member_strain_of_fraction(b, grid)
    return DmaCurve(strain=strain, stress=grid * sigma0, kind=CurveKind.UNLOADING,
                    temperature=a.curve.temperature)


@dataclass(frozen=True)
class DamageParams:
    """Stress-softening law parameters (error-function pseudo-elastic form)."""

    r: float
    m: float
    beta: float
    fit_rms_mpa: float | None = None

    def __post_init__(self):
        if not self.r > 1:
            raise ValueError("r must exceed 1")
        if self.m < 0 or self.beta < 0:
            raise ValueError("m and beta must be >= 0")


@dataclass(frozen=True)
class PlasticityTable:
    """Yield stress vs plastic strain rows from the unloading anchors."""

    rows: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ys = [r[0] for r in self.rows]
        ps = [r[1] for r in self.rows]
        if any(b <= a for a, b in zip(ys, ys[1:])) or any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("plasticity table columns must be strictly increasing")


@dataclass(frozen=True)
class PronySeries:
    """Relaxation series: pairs (modulus MPa, tau s) plus long-term modulus."""

    terms: tuple[tuple[float, float], ...]
    e_infinity: float
    fit_rms_storage: float | None = None
    fit_rms_loss: float | None = None

    def __post_init__(self):
        if self.e_infinity < 0 or any(g < 0 for g, _ in self.terms):
            raise ValueError("moduli must be >= 0")
        taus = [t for _, t in self.terms]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("relaxation times must be strictly increasing")

    @property
    def instantaneous_modulus(self) -> float:
        return self.e_infinity + sum(g for g, _ in self.terms)

    @property
    def long_term_fraction(self) -> float:
        """Ratio of fully relaxed to instantaneous modulus."""
        inst = self.instantaneous_modulus
        return self.e_infinity / inst if inst > 0 else 1.0

    def storage_modulus(self, freq_hz) -> np.ndarray:
        omega = 2 * np.pi * np.asarray(freq_hz, dtype=float)
        out = np.full_like(omega, self.e_infinity)
        for g, tau in self.terms:
            wt2 = (omega * tau) ** 2
            out = out + g * wt2 / (1 + wt2)
        return out

    def loss_modulus(self, freq_hz) -> np.ndarray:
        omega = 2 * np.pi * np.asarray(freq_hz, dtype=float)
        out = np.zeros_like(omega)
        for g, tau in self.terms:
            wt = omega * tau
            out = out + g * wt / (1 + wt ** 2)
        return out


@dataclass(frozen=True, eq=False)
class MaterialCard:
    """Complete calibrated description of one printed block material."""

    name: str
    marlow: MarlowCurve
    unloading: UnloadingFamily
    alpha_t: float
    poisson: float
    damage: DamageParams | None = None
    plasticity: PlasticityTable | None = None
    prony: PronySeries | None = None
    density: float = DEFAULT_DENSITY
    viscoelastic_enabled: bool = False

    def __post_init__(self):
        if not (0 < self.poisson < 0.5):
            raise ValueError("poisson must lie in (0, 0.5)")
        if self.alpha_t <= 0:
            raise ValueError("alpha_t must be > 0")
        if self.density <= 0:
            raise ValueError("density must be > 0")
        if self.viscoelastic_enabled and self.prony is None:
            raise ValueError("viscoelastic_enabled requires a fitted relaxation series")


def recoverable_strain(card: MaterialCard, sigma0: float) -> float:
    """Shrinkage released when the residual stress drops from sigma0 to zero.

    The selected unloading curve starts on the main loading curve at the
    strain reached under sigma0 and ends at its plastic anchor; the
    difference of those two strains is the recoverable (eigenstrain)
    magnitude.  ``sigma0 = 0`` releases nothing.
    """
    if sigma0 < 0:
        raise OutOfCalibrationRange("sigma0 must be >= 0")
    if sigma0 <= 1e-12:
        return 0.0
    if not card.unloading.members:
        # No calibrated unloading data (e.g. a linear card): release is purely
        # elastic, so the recoverable strain is sigma0 over the tangent modulus.
        return sigma0 / card.marlow.initial_tangent()
    curve = select_unloading_curve(card.unloading, sigma0)
    return float(curve.strain[0] - curve.strain[-1])


def extract_plasticity_table(family: UnloadingFamily,
                             marlow: MarlowCurve | None = None) -> PlasticityTable:
    """Yield-stress/plastic-strain rows from the family anchors.

    One row per member: (sigma0, anchor strain), sorted by stress.  If
    ``marlow`` is given the member peaks are validated against it first.
    """
    if not family.members:
        raise DegenerateFamily("empty unloading family")
    if marlow is not None:
        family.validate_against(marlow)
    anchors = [m.anchor_strain for m in family.members]
    if any(b <= a for a, b in zip(anchors, anchors[1:])):
        raise NonMonotoneAnchors("anchor strains must increase with sigma0")
    return PlasticityTable(rows=tuple((m.sigma0, m.anchor_strain) for m in family.members))


# --- damage fit ---------------------------------------------------------------


def eval_damaged_stress(marlow: MarlowCurve, params: DamageParams,
                        strain, peak_strain: float, anchor_strain: float) -> np.ndarray:
    """Unloading stress predicted by the softening law.

    The elastic strain is measured from the plastic anchor; the softening
    factor ``eta = 1 - (1/r) * erf((W_m - W) / (m + beta * W_m))`` scales the
    virgin stress at that elastic strain, where ``W`` is the virgin strain
    energy and ``W_m`` its value at the cycle peak.
    """
    e_eff = np.clip(np.asarray(strain, dtype=float) - anchor_strain, 0.0, None)
    w = np.asarray(marlow.energy_at(e_eff))
    w_peak = float(marlow.energy_at(max(peak_strain - anchor_strain, 0.0)))
    eta = 1.0 - (1.0 / params.r) * erf((w_peak - w) / (params.m + params.beta * w_peak))
    return eta * np.asarray(marlow.stress_at(e_eff))


def fit_damage_params(marlow: MarlowCurve, family: UnloadingFamily) -> DamageParams:
    """Least-squares fit of the softening parameters over a family.

    Returns the fitted parameters with the RMS stress residual over all
    family points attached.

    Raises
    ------
    DegenerateFamily
        Fewer than two members.
    FitDivergence
        The optimizer failed to reduce the initial residual by 10%.
    """
    if len(family.members) < 2:
        raise DegenerateFamily("damage fit needs at least two unloading curves")

    def residuals(x):
        r, m, beta = x
        params = DamageParams(r=max(r, 1 + 1e-9), m=m, beta=beta)
        res = []
        for member in family.members:
            pred = eval_damaged_stress(
                marlow, params, member.curve.strain,
                float(member.curve.strain[0]), member.anchor_strain,
            )
            res.append(pred - member.curve.stress)
        return np.concatenate(res)

    x0 = np.array([2.0, 0.05, 0.5])
    initial_rms = float(np.sqrt(np.mean(residuals(x0) ** 2)))
    sol = least_squares(residuals, x0,
                        bounds=([1 + 1e-6, 0.0, 0.0], [50.0, 10.0, 50.0]))
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    if not sol.success or rms > 0.9 * initial_rms:
        raise FitDivergence(
            f"damage fit stalled: rms {rms:.4g} MPa vs initial {initial_rms:.4g} MPa"
        )
    r, m, beta = sol.x
    return DamageParams(r=float(r), m=float(m), beta=float(beta), fit_rms_mpa=rms)


# --- viscoelastic fit ----------------------------------------------------------


def _prony_design(omega: np.ndarray, taus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    wt = omega[:, None] * taus[None, :]
    wt2 = wt ** 2
    storage = np.hstack([np.ones((omega.size, 1)), wt2 / (1 + wt2)])
    loss = np.hstack([np.zeros((omega.size, 1)), wt / (1 + wt2)])
    return storage, loss


def fit_prony(sweep: FrequencySweep, n_terms: int, refine_taus: bool = True) -> PronySeries:
    """Fit a relaxation series to storage and loss moduli jointly.

    Relaxation times start log-spaced across ``[1/(2 pi f_max), 1/(2 pi
    f_min)]``; term moduli and the long-term modulus are solved by
    non-negative least squares on the relative residuals of both moduli
    stacked.  With ``refine_taus`` (default) a single bounded least-squares
    pass then refines times and moduli together, which matters when the true
    relaxation times fall between grid points.

    Raises
    ------
    InsufficientData
        Fewer than ``2 * n_terms`` sweep rows.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if sweep.n_rows < 2 * n_terms:
        raise InsufficientData(
            f"{sweep.n_rows} rows cannot constrain {n_terms} relaxation terms"
        )
    omega = 2 * np.pi * sweep.freq_hz
    storage, loss = sweep.storage_mpa, sweep.loss_mpa
    tau_lo, tau_hi = 1 / omega.max(), 1 / omega.min()
    if n_terms == 1:
        taus = np.array([math.sqrt(tau_lo * tau_hi)])
    else:
        taus = np.geomspace(tau_lo, tau_hi, n_terms)

    def nnls_coefficients(taus_):
        ds, dl = _prony_design(omega, taus_)
        a = np.vstack([ds / storage[:, None], dl / loss[:, None]])
        b = np.concatenate([np.ones(omega.size), np.ones(omega.size)])
        coef, _ = nnls(a, b)
        return coef

    coef = nnls_coefficients(taus)
    if refine_taus:
        x0 = np.concatenate([coef, np.log(taus)])
        lower = np.concatenate([np.zeros(n_terms + 1),
                                np.full(n_terms, math.log(tau_lo) - 3.0)])
        upper = np.concatenate([np.full(n_terms + 1, np.inf),
                                np.full(n_terms, math.log(tau_hi) + 3.0)])

        def residuals(x):
            c = x[:n_terms + 1]
            ts = np.exp(x[n_terms + 1:])
            ds, dl = _prony_design(omega, ts)
            return np.concatenate([
                (ds @ c - storage) / storage,
                (dl @ c - loss) / loss,
            ])

        sol = least_squares(residuals, x0, bounds=(lower, upper), method="trf")
        coef = sol.x[:n_terms + 1]
        taus = np.exp(sol.x[n_terms + 1:])

    order = np.argsort(taus)
    taus = taus[order]
    moduli = coef[1:][order]
    # collapse refined times that collided onto one grid point
    merged: list[list[float]] = []
    for g, t in zip(moduli, taus):
        if merged and t <= merged[-1][1] * (1 + 1e-12):
            merged[-1][0] += g
        else:
            merged.append([float(g), float(t)])
    series = PronySeries(terms=tuple((g, t) for g, t in merged),
                         e_infinity=float(coef[0]))
    pred_s = series.storage_modulus(sweep.freq_hz)
    pred_l = series.loss_modulus(sweep.freq_hz)
    rms_s = float(np.sqrt(np.mean(((pred_s - storage) / storage) ** 2)))
    rms_l = float(np.sqrt(np.mean(((pred_l - loss) / loss) ** 2)))
    return replace(series, fit_rms_storage=rms_s, fit_rms_loss=rms_l)


def check_viscoelastic_dominance(sweep: FrequencySweep) -> bool:
    """True when viscous behavior dominates somewhere in the sweep range.

    The criterion is the loss/storage ratio reaching 1.0; materials that
    never cross it are treated as elastic and get no relaxation series.
    """
    return bool(sweep.max_tan_delta >= 1.0)


def long_term_modulus_fraction(card: MaterialCard) -> float:
    """Stage-B modulus scale: fully relaxed over instantaneous stiffness."""
    if card.viscoelastic_enabled and card.prony is not None:
        return card.prony.long_term_fraction
    return 1.0


# --- secant moduli -------------------------------------------------------------


def unloading_secant_modulus(card: MaterialCard, sigma0: float,
                             stress_fraction: float = SECANT_STRESS_FRACTION) -> float:
    """Secant modulus of the selected unloading curve near full release.

    Measured over the final ``stress_fraction`` of the stress range: from
    ``stress_fraction * sigma0`` down to the anchor at zero stress.
    """
    if sigma0 <= 1e-12:
        return card.marlow.initial_tangent()
    if not card.unloading.members:
        # Linear cards unload along the loading line: secant equals tangent.
        return card.marlow.initial_tangent()
    curve = select_unloading_curve(card.unloading, sigma0)
    peak = float(curve.stress[0])
    target = stress_fraction * peak
    strain_at_target = float(np.interp(target, curve.stress[::-1], curve.strain[::-1]))
    anchor = float(curve.strain[-1])
    if strain_at_target <= anchor:
        return card.marlow.initial_tangent()
    return target / (strain_at_target - anchor)


def loading_secant_modulus(card: MaterialCard, stress_level: float,
                           ) -> float:
    """Secant modulus of the virgin loading curve up to a stress level."""
    if stress_level <= 1e-12:
        return card.marlow.initial_tangent()
    strain = float(card.marlow.strain_at_stress(stress_level))
    if strain <= 0:
        return card.marlow.initial_tangent()
    return stress_level / strain


# --- construction helpers -------------------------------------------------------


def calibrate_card(name: str, loading: DmaCurve, unloading_curves: list[DmaCurve],
                   sweep: FrequencySweep | None = None, *,
                   alpha_t: float, poisson: float, density: float = DEFAULT_DENSITY,
                   prony_terms: int = 8, fit_damage: bool = False,
                   interpolation: Interpolation = Interpolation.LINEAR) -> MaterialCard:
    """Build a full material card from canonical curves.

    The plasticity table is always extracted from the unloading anchors.
    A relaxation series is fitted only when the sweep shows viscous
    dominance; elastic materials keep ``viscoelastic_enabled = False``.
    Damage fitting is optional (the tabular family is already exact on the
    calibration data).
    """
    marlow = MarlowCurve(loading=loading, interpolation=interpolation)
    family = build_unloading_family(unloading_curves, marlow=marlow)
    plasticity = extract_plasticity_table(family) if family.members else None
    damage = fit_damage_params(marlow, family) if fit_damage else None
    prony = None
    enabled = False
    if sweep is not None:
        enabled = check_viscoelastic_dominance(sweep)
        if enabled:
            prony = fit_prony(sweep, n_terms=prony_terms)
    return MaterialCard(
        name=name, marlow=marlow, unloading=family, alpha_t=alpha_t,
        poisson=poisson, damage=damage, plasticity=plasticity, prony=prony,
        density=density, viscoelastic_enabled=enabled,
    )


def make_linear_card(name: str, modulus_mpa: float, *, alpha_t: float, poisson: float,
                     density: float = DEFAULT_DENSITY, max_strain: float = 0.05,
                     ) -> MaterialCard:
    """Card for a linearly elastic material with no calibrated unloading data.

    Used for constraint-only materials whose uniaxial table is not
    available; the loading curve is the straight line through the origin
    with the given modulus.
    """
    loading = DmaCurve(
        strain=np.array([0.0, max_strain]),
        stress=np.array([0.0, modulus_mpa * max_strain]),
        kind=CurveKind.LOADING,
    )
    return MaterialCard(
        name=name, marlow=MarlowCurve(loading=loading),
        unloading=UnloadingFamily(members=()), alpha_t=alpha_t, poisson=poisson,
        density=density, viscoelastic_enabled=False,
    )


# --- serialization ---------------------------------------------------------------


def _curve_to_dict(curve: DmaCurve) -> dict:
    return {
        "strain": [float(v) for v in curve.strain],
        "stress_mpa": [float(v) for v in curve.stress],
        "kind": curve.kind.value,
        "temperature_c": curve.temperature,
        "sample_id": curve.sample_id,
    }


def _curve_from_dict(doc: dict) -> DmaCurve:
    return DmaCurve(
        strain=np.array(doc["strain"], dtype=float),
        stress=np.array(doc["stress_mpa"], dtype=float),
        kind=CurveKind(doc.get("kind", "mixed")),
        temperature=float(doc.get("temperature_c", 80.0)),
        sample_id=doc.get("sample_id", ""),
    )


def card_to_dict(card: MaterialCard) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "material_card",
        "name": card.name,
        "marlow": {
            "loading": _curve_to_dict(card.marlow.loading),
            "interpolation": card.marlow.interpolation.value,
        },
        "unloading": {
            "mode": card.unloading.mode.value,
            "members": [
                {
                    "sigma0_mpa": m.sigma0,
                    "anchor_strain": m.anchor_strain,
                    "curve": _curve_to_dict(m.curve),
                }
                for m in card.unloading.members
            ],
        },
        "alpha_t_per_c": card.alpha_t,
        "poisson": card.poisson,
        "density_kg_m3": card.density,
        "viscoelastic_enabled": card.viscoelastic_enabled,
        "damage": None,
        "plasticity": None,
        "prony": None,
    }
    if card.damage is not None:
        doc["damage"] = {
            "r": card.damage.r, "m_mpa": card.damage.m, "beta": card.damage.beta,
            "fit_rms_mpa": card.damage.fit_rms_mpa,
        }
    if card.plasticity is not None:
        doc["plasticity"] = [
            {"yield_stress_mpa": ys, "plastic_strain": ps} for ys, ps in card.plasticity.rows
        ]
    if card.prony is not None:
        doc["prony"] = {
            "e_infinity_mpa": card.prony.e_infinity,
            "terms": [{"e_mpa": g, "tau_s": t} for g, t in card.prony.terms],
            "fit_rms_storage": card.prony.fit_rms_storage,
            "fit_rms_loss": card.prony.fit_rms_loss,
        }
    return doc


def card_from_dict(doc: dict) -> MaterialCard:
    try:
        if doc.get("kind") != "material_card":
            raise InvalidDocument("not a material card document")
        if doc.get("format_version") != FORMAT_VERSION:
            raise InvalidDocument(
                f"unsupported material card format_version {doc.get('format_version')!r}"
            )
        marlow = MarlowCurve(
            loading=_curve_from_dict(doc["marlow"]["loading"]),
            interpolation=Interpolation(doc["marlow"].get("interpolation", "linear")),
        )
        members = tuple(
            UnloadingMember(
                sigma0=float(m["sigma0_mpa"]),
                curve=_curve_from_dict(m["curve"]),
                anchor_strain=float(m["anchor_strain"]),
            )
            for m in doc["unloading"]["members"]
        )
        family = UnloadingFamily(members=members,
                                 mode=FamilyMode(doc["unloading"].get("mode", "tabular")))
        damage = None
        if doc.get("damage") is not None:
            d = doc["damage"]
            damage = DamageParams(r=float(d["r"]), m=float(d["m_mpa"]), beta=float(d["beta"]),
                                  fit_rms_mpa=d.get("fit_rms_mpa"))
        plasticity = None
        if doc.get("plasticity") is not None:
            plasticity = PlasticityTable(rows=tuple(
                (float(r["yield_stress_mpa"]), float(r["plastic_strain"]))
                for r in doc["plasticity"]
            ))
        prony = None
        if doc.get("prony") is not None:
            p = doc["prony"]
            prony = PronySeries(
                terms=tuple((float(t["e_mpa"]), float(t["tau_s"])) for t in p["terms"]),
                e_infinity=float(p["e_infinity_mpa"]),
                fit_rms_storage=p.get("fit_rms_storage"),
                fit_rms_loss=p.get("fit_rms_loss"),
            )
        return MaterialCard(
            name=doc["name"], marlow=marlow, unloading=family,
            alpha_t=float(doc["alpha_t_per_c"]), poisson=float(doc["poisson"]),
            damage=damage, plasticity=plasticity, prony=prony,
            density=float(doc.get("density_kg_m3", DEFAULT_DENSITY)),
            viscoelastic_enabled=bool(doc.get("viscoelastic_enabled", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidDocument(f"malformed material card: {exc}") from exc


def save_material_card(card: MaterialCard, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(card_to_dict(card), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_material_card(path) -> MaterialCard:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidDocument(f"{path}: invalid JSON: {exc}") from exc
    return card_from_dict(doc)
