"""Spectrum container, baseline removal, multi-peak fitting and classification.

A probe scan is stored as (detuning, absorption, transmission) triples.
EIT structure is extracted in three steps: a smooth background (wide
Lorentzian plus linear trend) is removed, a sum of Lorentzians is fitted
to the two-photon residual, and the fitted centers are snapped to the
Zeeman grid {0, +-delta, +-2delta, +-3delta} to separate sigma peaks
(even multiples) from pi peaks (odd multiples).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths

from zeeman_eit.errors import BaselineFitError, ClassificationError, PeakFitError

SIGMA = "sigma"
PI = "pi"

# Fitted peaks below this fraction of the tallest are reported only as
# diagnostics, mirroring the unresolved-peak regime near the threshold field.
SIGNIFICANCE_FRACTION = 0.02


@dataclass(frozen=True)
class Spectrum:
    """Probe scan: strictly increasing detunings with finite samples."""

    delta_p: np.ndarray
    absorption: np.ndarray
    transmission: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "delta_p", np.asarray(self.delta_p, dtype=float))
        object.__setattr__(self, "absorption", np.asarray(self.absorption, dtype=float))
        if self.transmission is not None:
            object.__setattr__(self, "transmission", np.asarray(self.transmission, dtype=float))
            if self.transmission.shape != self.delta_p.shape:
                raise ValueError("transmission length must match detuning grid")
        if self.delta_p.ndim != 1 or self.delta_p.size < 2:
            raise ValueError("spectrum needs a 1-d grid with at least two points")
        if self.absorption.shape != self.delta_p.shape:
            raise ValueError("absorption length must match detuning grid")
        if not np.all(np.diff(self.delta_p) > 0):
            raise ValueError("detunings must be strictly increasing")
        if not (np.all(np.isfinite(self.delta_p)) and np.all(np.isfinite(self.absorption))):
            raise ValueError("spectrum values must be finite")

    @property
    def step(self) -> float:
        return float(np.median(np.diff(self.delta_p)))


@dataclass(frozen=True)
class Peak:
    """One fitted Lorentzian: center/width in MHz, background-subtracted height."""

    center: float
    amplitude: float
    width: float
    klass: str | None = None
    index: int | None = None

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("peak width must be positive")
        if self.amplitude < 0:
            raise ValueError("peak amplitude must be nonnegative")


@dataclass(frozen=True)
class PeakSet:
    peaks: tuple
    spacing_estimate: float | None = None
    fit_residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def by_index(self, index: int) -> Peak | None:
        for p in self.peaks:
            if p.index == index:
                return p
        return None


def lorentzian(x, center, amplitude, fwhm):
    """Amplitude-normalized Lorentzian with full width at half maximum."""
    hw = fwhm / 2.0
    return amplitude * hw * hw / ((x - center) ** 2 + hw * hw)


def _multi_lorentzian(x, params):
    y = np.zeros_like(x)
    for i in range(0, len(params), 3):
        y += lorentzian(x, params[i], params[i + 1], params[i + 2])
    return y


def _baseline_model(x, params):
    amp, center, width, slope, offset = params
    return lorentzian(x, center, amp, width) + slope * x + offset


def subtract_baseline(spectrum: Spectrum, passes: int = 3) -> Spectrum:
    """Remove the broad one-photon background, returning the two-photon signal.

    A single wide Lorentzian plus a linear trend is fitted with the narrow
    peak regions iteratively masked out.  The residual is sign-flipped if
    the dominant features are dips, so EIT structure always comes back as
    positive peaks.
    """
    x = spectrum.delta_p
    y = spectrum.absorption
    if x.size < 50:
        raise ValueError("baseline subtraction needs at least 50 points across the peaks")

    span = x[-1] - x[0]
    slope0, offset0 = np.polyfit(x, y, 1)
    detrended = y - (slope0 * x + offset0)
    i_ext = int(np.argmax(np.abs(detrended)))
    p0 = np.array([detrended[i_ext], x[i_ext], span / 2.0, slope0, offset0])

    lower = [-np.inf, x[0] - span, spectrum.step, -np.inf, -np.inf]
    upper = [np.inf, x[-1] + span, 10.0 * span, np.inf, np.inf]
    mask = np.ones_like(x, dtype=bool)
    params = p0
    for _ in range(passes):
        try:
            fit = least_squares(
                lambda p: _baseline_model(x[mask], p) - y[mask],
                np.clip(params, lower, upper),
                bounds=(lower, upper),
                max_nfev=4000,
            )
        except ValueError as exc:
            raise BaselineFitError(f"background fit diverged: {exc}") from exc
        if not np.all(np.isfinite(fit.x)):
            raise BaselineFitError("background fit produced non-finite parameters")
        params = fit.x
        resid = y - _baseline_model(x, params)
        sigma = 1.4826 * np.median(np.abs(resid - np.median(resid))) + 1e-30
        mask = np.abs(resid - np.median(resid)) < 3.0 * sigma
        if mask.sum() < 10:
            raise BaselineFitError("background fit masked out nearly all samples")

    residual = y - _baseline_model(x, params)
    orientation = 1.0 if residual.max() >= -residual.min() else -1.0
    meta = dict(spectrum.metadata)
    meta["baseline_subtracted"] = True
    meta["baseline_orientation"] = orientation
    return Spectrum(x, orientation * residual, transmission=None, metadata=meta)


def fit_peaks(spectrum: Spectrum, expected_count: int | None = None) -> PeakSet:
    """Least-squares fit of a sum of Lorentzians to a baseline-subtracted scan.

    Initialization is a deterministic local-maximum scan; fitted peaks
    below 2% of the tallest are dropped from the result (kept in
    diagnostics).  Raises PeakFitError with the best residual when the
    optimizer fails to converge.
    """
    x = spectrum.delta_p
    y = spectrum.absorption
    step = spectrum.step
    span = x[-1] - x[0]
    ymax = float(y.max())
    if ymax <= 0:
        raise PeakFitError("no positive signal to fit", best_residual=float(np.sqrt(np.mean(y**2))))

    noise = 1.4826 * float(np.median(np.abs(np.diff(y)))) / math.sqrt(2.0)
    prominence = max(0.015 * ymax, 4.0 * noise)
    idx, _ = find_peaks(y, prominence=prominence)
    if idx.size == 0:
        raise PeakFitError("no candidate peaks above the significance floor",
                           best_residual=float(np.sqrt(np.mean(y**2))))
    if expected_count is not None and idx.size > expected_count:
        order = np.argsort(y[idx])[::-1][:expected_count]
        idx = np.sort(idx[order])

    widths_samples = peak_widths(y, idx, rel_height=0.5)[0]
    widths0 = np.clip(widths_samples * step, 2.0 * step, span / 2.0)

    p0, lower, upper = [], [], []
    for i, w0 in zip(idx, widths0):
        c0 = x[i]
        p0 += [c0, y[i], w0]
        lower += [max(x[0], c0 - 3.0 * w0), 0.0, step]
        upper += [min(x[-1], c0 + 3.0 * w0), 4.0 * ymax, span]
    p0 = np.clip(p0, lower, upper)

    fit = least_squares(
        lambda p: _multi_lorentzian(x, p) - y,
        p0,
        bounds=(lower, upper),
        max_nfev=400 * len(p0),
    )
    rms = float(np.sqrt(np.mean(fit.fun**2)))
    if fit.status <= 0 or not np.all(np.isfinite(fit.x)):
        raise PeakFitError("multi-Lorentzian fit did not converge", best_residual=rms)

    fitted = [
        Peak(center=float(fit.x[i]), amplitude=float(fit.x[i + 1]), width=float(fit.x[i + 2]))
        for i in range(0, len(fit.x), 3)
    ]
    tallest = max(p.amplitude for p in fitted)
    kept = tuple(sorted((p for p in fitted if p.amplitude >= SIGNIFICANCE_FRACTION * tallest),
                        key=lambda p: p.center))
    dropped = [p for p in fitted if p.amplitude < SIGNIFICANCE_FRACTION * tallest]
    diagnostics = {
        "n_initial": int(idx.size),
        "below_significance": [(p.center, p.amplitude) for p in dropped],
        "noise_estimate": noise,
    }
    spacing = None
    if len(kept) >= 2:
        try:
            spacing = estimate_spacing(kept)
        except ClassificationError:
            spacing = None
    return PeakSet(kept, spacing_estimate=spacing, fit_residual=rms, diagnostics=diagnostics)


def _assign(centers: np.ndarray, spacing: float):
    indices = np.round(centers / spacing).astype(int)
    residuals = np.abs(centers - indices * spacing)
    return indices, residuals


def estimate_spacing(peaks, pattern: str = "full") -> float:
    """Infer the Zeeman spacing delta from fitted peak centers.

    pattern="full": centers must sit on {0,...,+-3}*delta.  A symmetric
    three-peak spectrum with no odd neighbors is read as sigma-only
    {0, +-2delta}, since a zero-detuning peak is always accompanied by
    its +-2delta partners in the full scheme.
    pattern="toy": three-peak analytic-model spectra, centers {0, +-delta}.
    """
    centers = np.array(sorted(p.center for p in peaks), dtype=float)
    if centers.size < 2:
        raise ClassificationError("need at least two peaks to estimate a spacing")

    if pattern == "toy":
        outer = np.abs(centers[np.abs(centers) > 0.25 * np.abs(centers).max()])
        if outer.size == 0:
            raise ClassificationError("toy pattern needs nonzero-detuning peaks")
        return float(np.mean(outer))
    if pattern != "full":
        raise ValueError(f"unknown pattern {pattern!r}")

    diffs = np.diff(centers)
    s = float(np.median(diffs))
    candidates = [s, s / 2.0]
    nonzero = np.abs(centers)[np.abs(centers) > 0.1 * np.abs(centers).max()]
    if nonzero.size:
        candidates.append(float(nonzero.min()))

    best = None
    for cand in sorted(set(candidates), reverse=True):
        if cand <= 0:
            continue
        indices, residuals = _assign(centers, cand)
        if np.any(residuals > cand / 4.0):
            continue
        if len(set(indices.tolist())) != len(indices):
            continue
        if np.any(np.abs(indices) > 3):
            continue
        has = set(np.abs(indices).tolist())
        if 0 in has and 1 in has and 2 not in has:
            # a lone {0, +-1} pattern cannot occur: sigma-sigma coupling
            # always places partners at +-2 when the center peak exists
            continue
        refined = float(np.sum(centers * indices) / np.sum(indices**2)) if np.any(indices) else cand
        best = refined
        break
    if best is None:
        raise ClassificationError("no Zeeman spacing explains the fitted centers",
                                  offenders=centers.tolist())
    return best


def classify_peaks(peakset: PeakSet, spacing: float) -> PeakSet:
    """Snap peak centers to the index grid and label sigma/pi by parity."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    offenders = []
    classified = []
    seen = set()
    for p in peakset.peaks:
        k = int(np.round(p.center / spacing))
        resid = abs(p.center - k * spacing)
        if resid > spacing / 4.0 or abs(k) > 3 or k in seen:
            offenders.append((p.center, resid))
            continue
        seen.add(k)
        classified.append(replace(p, index=k, klass=SIGMA if k % 2 == 0 else PI))
    if offenders:
        raise ClassificationError(
            f"{len(offenders)} peak(s) fall off the grid of spacing {spacing:.4g} MHz",
            offenders=offenders,
        )
    classified.sort(key=lambda p: p.index)
    indices = np.array([p.index for p in classified])
    centers = np.array([p.center for p in classified])
    refined = float(np.sum(centers * indices) / np.sum(indices**2)) if np.any(indices) else spacing
    return PeakSet(tuple(classified), spacing_estimate=refined,
                   fit_residual=peakset.fit_residual, diagnostics=dict(peakset.diagnostics))


def read_spectrum_csv(path, calibration: float = 1.0) -> Spectrum:
    """Read a spectrum CSV: header delta_p_mhz,signal (or im_chi[,transmission]).

    calibration rescales the first column (MHz per recorded unit) for
    instrument data whose x axis is not already in MHz.  Lines starting
    with '#' are ignored.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty CSV")
        header = [h.strip() for h in header]
        if header[0] != "delta_p_mhz":
            raise ValueError(f"{path}: first column must be delta_p_mhz, got {header[0]!r}")
        for row in reader:
            if row:
                rows.append([float(v) for v in row])
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    delta = data[:, 0] * calibration
    signal = data[:, 1]
    transmission = data[:, 2] if data.shape[1] > 2 and "transmission" in header else None
    return Spectrum(delta, signal, transmission=transmission,
                    metadata={"source": str(path), "columns": header})


def write_spectrum_csv(spectrum: Spectrum, path) -> None:
    """Write delta_p_mhz,im_chi[,transmission] rows (repr round-trip safe)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if spectrum.transmission is not None:
            writer.writerow(["delta_p_mhz", "im_chi", "transmission"])
            for d, a, t in zip(spectrum.delta_p, spectrum.absorption, spectrum.transmission):
                writer.writerow([repr(float(d)), repr(float(a)), repr(float(t))])
        else:
            writer.writerow(["delta_p_mhz", "signal"])
            for d, a in zip(spectrum.delta_p, spectrum.absorption):
                writer.writerow([repr(float(d)), repr(float(a))])
