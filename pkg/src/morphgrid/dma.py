"""Parsing, smoothing, and cycle segmentation of DMA test records.

Raw inputs are CSV exports of two kinds: uniaxial stress--strain records
(columns ``strain,stress_mpa``) and frequency sweeps
(``freq_hz,storage_mpa,loss_mpa,tan_delta,pre_strain``).  This module turns
them into validated curve objects, smooths them with a penalized basis-spline
fit, splits cyclic records into loading/unloading pairs, and extracts the
virgin-envelope loading curve that the material calibration consumes.

Units are fixed: dimensionless engineering strain, MPa engineering stress,
Hz frequency, degrees Celsius.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import BSpline

from .errors import (
    DanglingRun,
    EmptyFile,
    MalformedRow,
    NoCyclesFound,
    OverlapInconsistency,
    SchemaMismatch,
    SingularSystem,
    TooFewPoints,
)

STRESS_STRAIN_HEADER = ["strain", "stress_mpa"]
FREQUENCY_SWEEP_HEADER = ["freq_hz", "storage_mpa", "loss_mpa", "tan_delta", "pre_strain"]

#: Stress reversals smaller than this fraction of the running peak are jitter.
REVERSAL_FRACTION = 0.005

#: Envelope points may dip below the running envelope by at most this
#: fraction of the record's peak stress before the data is rejected.
ENVELOPE_DIP_FRACTION = 0.05


class CurveKind(str, enum.Enum):
    LOADING = "loading"
    UNLOADING = "unloading"
    MIXED = "mixed"


@dataclass(frozen=True, eq=False)
class DmaCurve:
    """An ordered stress--strain record.

    ``kind`` describes the strain ordering: strictly increasing for
    ``loading``, strictly decreasing for ``unloading``, unconstrained for
    ``mixed``.  Virgin loading records (full tests and envelope outputs)
    additionally start at the origin; segmentation byproducts such as
    reloading branches start wherever the previous cycle left off, so the
    origin requirement is enforced by the constructors that need it
    (:func:`parse_dma_csv` classification and
    :func:`extract_main_loading_curve`) rather than here.
    """

    strain: np.ndarray
    stress: np.ndarray
    kind: CurveKind = CurveKind.MIXED
    temperature: float = 80.0
    sample_id: str = ""

    def __post_init__(self):
        strain = np.asarray(self.strain, dtype=float)
        stress = np.asarray(self.stress, dtype=float)
        object.__setattr__(self, "strain", strain)
        object.__setattr__(self, "stress", stress)
        if strain.ndim != 1 or strain.shape != stress.shape:
            raise ValueError("strain and stress must be 1-D arrays of equal length")
        if strain.size < 2:
            raise TooFewPoints("a curve needs at least two points")
        if not (np.isfinite(strain).all() and np.isfinite(stress).all()):
            raise ValueError("non-finite values in curve data")
        if (stress < 0).any():
            raise ValueError("negative stresses: only tensile records are supported")
        d = np.diff(strain)
        if self.kind is CurveKind.LOADING and not (d > 0).all():
            raise ValueError("loading curve strains must be strictly increasing")
        if self.kind is CurveKind.UNLOADING and not (d < 0).all():
            raise ValueError("unloading curve strains must be strictly decreasing")

    @property
    def n_points(self) -> int:
        return int(self.strain.size)

    @property
    def peak_stress(self) -> float:
        return float(self.stress.max())

    def starts_at_origin(self, tol: float = 1e-9) -> bool:
        return abs(self.strain[0]) <= tol and abs(self.stress[0]) <= tol


@dataclass(frozen=True, eq=False)
class FrequencySweep:
    """DMA frequency-domain record: storage/loss moduli over a sweep."""

    freq_hz: np.ndarray
    storage_mpa: np.ndarray
    loss_mpa: np.ndarray
    tan_delta: np.ndarray
    pre_strain: np.ndarray
    material_label: str = ""

    def __post_init__(self):
        for name in ("freq_hz", "storage_mpa", "loss_mpa", "tan_delta", "pre_strain"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.freq_hz.size
        if any(getattr(self, name).shape != (n,) for name in
               ("storage_mpa", "loss_mpa", "tan_delta", "pre_strain")):
            raise ValueError("sweep columns must share one length")
        if n < 1:
            raise EmptyFile("empty frequency sweep")
        if (self.freq_hz <= 0).any() or (np.diff(self.freq_hz) <= 0).any():
            raise ValueError("frequencies must be positive and strictly increasing")
        ratio = self.loss_mpa / self.storage_mpa
        if not np.allclose(ratio, self.tan_delta, rtol=1e-3, atol=0):
            raise ValueError("tan_delta column inconsistent with loss/storage ratio")
        if not np.allclose(self.pre_strain, self.pre_strain[0], rtol=0, atol=1e-12):
            raise ValueError("pre_strain must be constant across the sweep")

    @property
    def n_rows(self) -> int:
        return int(self.freq_hz.size)

    @property
    def max_tan_delta(self) -> float:
        return float(self.tan_delta.max())


@dataclass(frozen=True)
class CycleSet:
    """Loading/unloading pairs split out of a cyclic record."""

    cycles: tuple[tuple[DmaCurve, DmaCurve], ...]
    peak_stresses: tuple[float, ...]

    def __post_init__(self):
        if len(self.cycles) != len(self.peak_stresses):
            raise ValueError("one peak stress per cycle")
        for loading, unloading in self.cycles:
            gap = abs(unloading.strain[0] - loading.strain[-1])
            if gap > 0.01 * max(abs(loading.strain[-1]), 1e-12):
                raise ValueError("unloading must start within 1% strain of loading end")
        if any(b < a - 1e-12 for a, b in zip(self.peak_stresses, self.peak_stresses[1:])):
            raise ValueError("peak stresses must be non-decreasing across cycles")

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)


@dataclass(frozen=True)
class SmootherConfig:
    """Penalized-spline smoothing controls.

    ``lambda_`` is the penalty weight; ``None`` selects it by generalized
    cross-validation.  ``knot_stride`` places one basis knot per that many
    data points (1 = a knot at every point, the interpolation limit).
    """

    lambda_: float | None = None
    penalty_order: int = 2
    knot_stride: int = 3
    gcv_grid: tuple[float, float, int] = (1e-9, 1e3, 61)

    def __post_init__(self):
        if self.lambda_ is not None and self.lambda_ < 0:
            raise ValueError("lambda must be >= 0")
        if self.penalty_order < 1:
            raise ValueError("penalty_order must be >= 1")
        if self.knot_stride < 1:
            raise ValueError("knot_stride must be >= 1")


# --- parsing -----------------------------------------------------------------


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: file is empty") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    return [h.strip() for h in header], rows


def _parse_floats(rows: list[list[str]], width: int) -> np.ndarray:
    out = np.empty((len(rows), width), dtype=float)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise MalformedRow(i + 2, f"expected {width} columns, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise MalformedRow(i + 2, f"non-numeric cell {cell!r}") from None
    return out


def parse_dma_csv(path, schema: str) -> DmaCurve | FrequencySweep:
    """Parse a DMA CSV export.

    Parameters
    ----------
    path : path-like
        CSV file with a single header row.
    schema : {"stress_strain", "frequency_sweep"}
        Expected layout; the header must match exactly.

    Returns
    -------
    DmaCurve or FrequencySweep
        Row order is preserved verbatim.  Stress--strain records are
        classified by their strain ordering: strictly increasing from the
        origin is ``loading``, strictly decreasing is ``unloading``,
        anything else is ``mixed``.
    """
    header, rows = _read_rows(path)
    if schema == "stress_strain":
        if header != STRESS_STRAIN_HEADER:
            raise SchemaMismatch(f"{path}: expected header {STRESS_STRAIN_HEADER}, found {header}")
        data = _parse_floats(rows, 2)
        strain, stress = data[:, 0], data[:, 1]
        d = np.diff(strain)
        if (d > 0).all() and abs(strain[0]) <= 1e-9 and abs(stress[0]) <= 1e-9:
            kind = CurveKind.LOADING
        elif (d < 0).all():
            kind = CurveKind.UNLOADING
        else:
            kind = CurveKind.MIXED
        return DmaCurve(strain=strain, stress=stress, kind=kind)
    if schema == "frequency_sweep":
        if header != FREQUENCY_SWEEP_HEADER:
            raise SchemaMismatch(f"{path}: expected header {FREQUENCY_SWEEP_HEADER}, found {header}")
        data = _parse_floats(rows, 5)
        return FrequencySweep(
            freq_hz=data[:, 0], storage_mpa=data[:, 1], loss_mpa=data[:, 2],
            tan_delta=data[:, 3], pre_strain=data[:, 4],
        )
    raise SchemaMismatch(f"unknown schema {schema!r}")


def write_dma_csv(curve: DmaCurve, path) -> None:
    """Serialize a stress--strain curve; values round-trip bit-identically."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(STRESS_STRAIN_HEADER)
        for e, s in zip(curve.strain, curve.stress):
            writer.writerow([repr(float(e)), repr(float(s))])


# --- smoothing ---------------------------------------------------------------


def _spline_basis(x: np.ndarray, knot_stride: int, degree: int = 3) -> np.ndarray:
    interior = x[::knot_stride][1:-1]
    knots = np.r_[[x[0]] * (degree + 1), interior, [x[-1]] * (degree + 1)]
    return BSpline.design_matrix(x, knots, degree, extrapolate=False).toarray()


def _difference_matrix(n_coef: int, order: int) -> np.ndarray:
    d = np.eye(n_coef)
    for _ in range(order):
        d = np.diff(d, axis=0)
    return d


def _penalized_fit(basis: np.ndarray, y: np.ndarray, lam: float, dmat: np.ndarray) -> np.ndarray:
    stacked = np.vstack([basis, np.sqrt(lam) * dmat])
    rhs = np.concatenate([y, np.zeros(dmat.shape[0])])
    coef, *_ = np.linalg.lstsq(stacked, rhs, rcond=None)
    return coef


def _gcv_lambda(basis: np.ndarray, y: np.ndarray, dmat: np.ndarray,
                grid: tuple[float, float, int]) -> float:
    """Pick the penalty weight minimizing the GCV score over a log grid."""
    n = y.size
    gram = basis.T @ basis
    pen = dmat.T @ dmat
    best_lam, best_score = None, np.inf
    for lam in np.geomspace(grid[0], grid[1], grid[2]):
        try:
            hat = basis @ np.linalg.solve(gram + lam * pen, basis.T)
        except np.linalg.LinAlgError:
            continue
        resid = y - hat @ y
        denom = n - np.trace(hat)
        if denom <= 0:
            continue
        score = n * float(resid @ resid) / denom**2
        if score < best_score:
            best_lam, best_score = lam, score
    if best_lam is None:
        raise SingularSystem("GCV search failed on every candidate penalty")
    return best_lam


def smooth_pspline(curve: DmaCurve, config: SmootherConfig = SmootherConfig()) -> DmaCurve:
    """Smooth the stress channel with a penalized cubic-spline fit.

    Solves ``min ||B c - y||^2 + lambda ||D c||^2`` where ``B`` is a cubic
    basis-spline design matrix on knots taken every ``config.knot_stride``
    data points and ``D`` is the difference matrix of order
    ``config.penalty_order``.  The returned curve keeps the input strain
    abscissae.  With ``lambda_ = 0`` and ``knot_stride = 1`` the basis can
    represent the data exactly and the fit reproduces it (interpolation
    limit).

    Raises
    ------
    TooFewPoints
        Fewer than 10 samples.
    SingularSystem
        Duplicate strain abscissae.
    """
    if curve.n_points < 10:
        raise TooFewPoints("smoothing needs at least 10 points")
    x, y = curve.strain, curve.stress
    if (np.diff(np.sort(x)) == 0).any():
        raise SingularSystem("duplicate strain abscissae")
    order = np.argsort(x, kind="stable")
    inverse = np.argsort(order, kind="stable")
    xs, ys = x[order], y[order]
    basis = _spline_basis(xs, config.knot_stride)
    dmat = _difference_matrix(basis.shape[1], config.penalty_order)
    lam = config.lambda_
    if lam is None:
        lam = _gcv_lambda(basis, ys, dmat, config.gcv_grid)
    coef = _penalized_fit(basis, ys, lam, dmat)
    smoothed = (basis @ coef)[inverse]
    # tiny negative undershoot near the origin is clipped to honor the
    # tensile-record invariant
    smoothed = np.clip(smoothed, 0.0, None)
    return replace(curve, stress=smoothed)


# --- cycle segmentation ------------------------------------------------------


def _monotone_runs(stress: np.ndarray) -> list[tuple[int, int, int]]:
    """Split indices into alternating direction runs: (start, stop, direction).

    ``stop`` is inclusive.  A direction reversal is only recognized when the
    stress moves against the current direction by more than
    ``REVERSAL_FRACTION`` of the running peak; smaller wiggles are jitter and
    stay inside the run.
    """
    n = stress.size
    runs = []
    start = 0
    direction = 0
    running_peak = abs(float(stress[0]))
    extreme = float(stress[0])
    extreme_i = 0
    for i in range(1, n):
        s = float(stress[i])
        running_peak = max(running_peak, abs(s))
        if direction == 0:
            if s > extreme:
                direction = 1
            elif s < extreme:
                direction = -1
            extreme, extreme_i = s, i
            continue
        if (s - extreme) * direction >= 0:
            extreme, extreme_i = s, i
            continue
        if abs(s - extreme) > REVERSAL_FRACTION * max(running_peak, 1e-12):
            runs.append((start, extreme_i, direction))
            start = extreme_i + 1
            direction = -direction
            extreme, extreme_i = s, i
    runs.append((start, n - 1, direction))
    return runs


def segment_cycles(raw: DmaCurve) -> CycleSet:
    """Split a cyclic record into (loading, unloading) pairs.

    Each maximal increasing stress run becomes a loading curve and the
    following decreasing run its unloading curve.  The runs partition the
    record: concatenating all cycle curves in order reproduces the raw
    point sequence exactly.

    Raises
    ------
    NoCyclesFound
        The record is monotone (nothing to split).
    DanglingRun
        Runs do not alternate into complete loading/unloading pairs.
    """
    runs = _monotone_runs(raw.stress)
    if len(runs) < 2:
        raise NoCyclesFound("record is monotone; no unloading run found")
    if runs[0][2] != 1:
        raise DanglingRun("record must start with a loading run")
    if len(runs) % 2 != 0:
        raise DanglingRun("trailing loading run has no unloading partner")
    cycles = []
    peaks = []
    for k in range(0, len(runs), 2):
        ls, le, ldir = runs[k]
        us, ue, udir = runs[k + 1]
        if ldir != 1 or udir != -1:
            raise DanglingRun("runs do not alternate loading/unloading")
        loading = DmaCurve(raw.strain[ls:le + 1], raw.stress[ls:le + 1],
                           CurveKind.LOADING, raw.temperature, raw.sample_id)
        unloading = DmaCurve(raw.strain[us:ue + 1], raw.stress[us:ue + 1],
                             CurveKind.UNLOADING, raw.temperature, raw.sample_id)
        cycles.append((loading, unloading))
        peaks.append(loading.peak_stress)
    return CycleSet(cycles=tuple(cycles), peak_stresses=tuple(peaks))


def extract_main_loading_curve(cycles: CycleSet) -> DmaCurve:
    """Assemble the virgin-envelope loading curve from a cycle set.

    For each cycle, the portion of its loading run at strains beyond every
    previous cycle's peak strain is kept; the portions are concatenated in
    strain order.  Reloading branches retrace softened material below the
    historical peak and rejoin the virgin curve above it, so the result is
    the material's main loading curve.

    Points that fall below the running envelope by up to
    ``ENVELOPE_DIP_FRACTION`` of the record peak stress are treated as
    scatter and dropped; larger dips raise :class:`OverlapInconsistency`.
    """
    if not cycles.cycles:
        raise NoCyclesFound("empty cycle set")
    peak_all = max(c[0].peak_stress for c in cycles.cycles)
    strains: list[float] = []
    stresses: list[float] = []
    prev_peak_strain = -np.inf
    for loading, _ in cycles.cycles:
        mask = loading.strain > prev_peak_strain
        for e, s in zip(loading.strain[mask], loading.stress[mask]):
            if stresses and s < stresses[-1]:
                if stresses[-1] - s > ENVELOPE_DIP_FRACTION * peak_all:
                    raise OverlapInconsistency(
                        f"envelope drops by {stresses[-1] - s:.4g} MPa at strain {e:.6g}"
                    )
                continue
            strains.append(float(e))
            stresses.append(float(s))
        prev_peak_strain = max(prev_peak_strain, float(loading.strain.max()))
    first = cycles.cycles[0][0]
    out = DmaCurve(np.array(strains), np.array(stresses), CurveKind.LOADING,
                   first.temperature, first.sample_id)
    if not out.starts_at_origin(tol=1e-9):
        raise OverlapInconsistency("envelope does not start at the origin")
    return out
