"""The four experiments: spiral bandwidth, angular correlations, EPR-Reid, Bell.

Each scan synthesizes noisy coincidence records over a parameter grid from a
two-photon state, using one seed-derived random stream per setting so results
do not depend on evaluation order.  The statistics helpers (Gaussian fitting,
conditional-variance products, Bell parameter with error propagation) operate
on counts and are reused by the command-line runner.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .modes import sector_coefficients
from .spdc import CoincidenceRecord, DetectorConfig, TwoPhotonState, sample_counts


class FitError(RuntimeError):
    """Raised when a least-squares fit cannot be performed or fails to converge."""


@dataclass(frozen=True)
class GaussianFit:
    """Parameters of A exp(-(x - mean)^2 / (2 variance))."""

    amplitude: float
    mean: float
    variance: float
    residual_norm: float

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("fitted variance must be positive")

    @property
    def fwhm(self) -> float:
        return math.sqrt(8.0 * math.log(2.0) * self.variance)

    def __call__(self, x):
        return self.amplitude * np.exp(-((np.asarray(x) - self.mean) ** 2) / (2.0 * self.variance))


def fit_gaussian(xs, ys, max_nfev: int = 20000) -> GaussianFit:
    """Least-squares Gaussian fit A exp(-(x-mu)^2 / (2 s^2)) to (xs, ys).

    Needs at least four points that are not all equal.  Raises FitError on
    degenerate data or non-convergence.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise FitError("xs and ys must be 1-D arrays of equal length")
    if len(xs) < 4:
        raise FitError("need at least 4 points to fit a Gaussian")
    if np.ptp(ys) == 0:
        raise FitError("degenerate data: all values equal")

    peak = float(np.max(ys))
    mu0 = float(xs[np.argmax(ys)])
    weights = np.clip(ys, 0.0, None)
    spacing = np.min(np.diff(np.sort(xs)))
    if weights.sum() > 0:
        var0 = float(np.sum((xs - mu0) ** 2 * weights) / np.sum(weights))
    else:
        var0 = float(np.var(xs))
    s0 = math.sqrt(max(var0, (0.05 * spacing) ** 2))

    def residuals(p):
        a, mu, s = p
        return a * np.exp(-((xs - mu) ** 2) / (2.0 * s * s)) - ys

    result = least_squares(residuals, [peak, mu0, s0], method="lm",
                           ftol=1e-12, xtol=1e-12, gtol=1e-12, max_nfev=max_nfev)
    if not result.success:
        raise FitError(f"gaussian fit did not converge: {result.message}")
    a, mu, s = result.x
    return GaussianFit(amplitude=float(a), mean=float(mu), variance=float(s * s),
                       residual_norm=float(np.linalg.norm(result.fun)))


@dataclass(frozen=True)
class ScanResult:
    """Grid of coincidence records plus the axes that generated it."""

    axis_names: tuple[str, ...]
    axis_values: tuple[np.ndarray, ...]
    records: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = tuple(len(v) for v in self.axis_values)
        if self.records.shape != shape:
            raise ValueError(f"records shape {self.records.shape} does not match axes {shape}")

    def _map(self, attr):
        out = np.empty(self.records.shape, dtype=float)
        for idx in np.ndindex(self.records.shape):
            out[idx] = getattr(self.records[idx], attr)
        return out

    def ideal_rates(self) -> np.ndarray:
        return self._map("ideal_rate")

    def counts(self) -> np.ndarray:
        return self._map("count")

    def accidental_estimates(self) -> np.ndarray:
        return self._map("accidental_estimate")

    def rows(self):
        """One (axis values..., ideal rate, count, accidental) tuple per setting."""
        for idx in np.ndindex(self.records.shape):
            rec = self.records[idx]
            coords = tuple(self.axis_values[k][i] for k, i in enumerate(idx))
            yield (*coords, rec.ideal_rate, rec.count, rec.accidental_estimate)


def _sample_grid(rates: np.ndarray, det: DetectorConfig, seed: int) -> np.ndarray:
    records = np.empty(rates.shape, dtype=object)
    for setting_id, idx in enumerate(np.ndindex(rates.shape)):
        records[idx] = sample_counts(float(rates[idx]), det, seed, setting_id=setting_id)
    return records


def spiral_scan(state: TwoPhotonState, ells_a, ells_b, det: DetectorConfig,
                seed: int, pair_rate: float = 1e4, metadata: dict | None = None) -> ScanResult:
    """Coincidence matrix over projector pairs (ell_A, ell_B).

    Ideal rates are pair_rate times the joint OAM probabilities of the state;
    the anti-diagonal of a square scan is the spiral spectrum.
    """
    ells_a = np.asarray(ells_a, dtype=int)
    ells_b = np.asarray(ells_b, dtype=int)
    joint = state.joint_matrix()
    idx_a = [state.index_of(int(l)) for l in ells_a]
    idx_b = [state.index_of(int(l)) for l in ells_b]
    probs = np.abs(joint[np.ix_(idx_a, idx_b)]) ** 2
    rates = pair_rate * probs
    records = _sample_grid(rates, det, seed)
    meta = {"seed": seed, "pair_rate": pair_rate}
    meta.update(metadata or {})
    return ScanResult(("ell_a", "ell_b"), (ells_a.astype(float), ells_b.astype(float)), records, meta)


def angular_scan(state: TwoPhotonState, width: float, orientations_a, orientations_b,
                 det: DetectorConfig, seed: int, pair_rate: float = 1e4,
                 metadata: dict | None = None) -> ScanResult:
    """Coincidence map over sector-hologram orientations (beta_A, beta_B).

    Rates are computed in the OAM basis: the two sector projectors enter
    through their azimuthal Fourier coefficients, truncated to the state
    support and normalized to unit vectors there.
    """
    if not 0.0 < width <= 2.0 * math.pi:
        raise ValueError("sector width must lie in (0, 2*pi]")
    orientations_a = np.asarray(orientations_a, dtype=float)
    orientations_b = np.asarray(orientations_b, dtype=float)
    joint = state.joint_matrix()
    ells = state.ells

    def arm_coeffs(betas):
        vecs = np.array([sector_coefficients(b, width, ells) for b in betas])
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        return vecs / norms

    ca = arm_coeffs(orientations_a)
    cb = arm_coeffs(orientations_b)
    # amplitude(beta_a, beta_b) = sum_{ls, li} joint[ls, li] c_ls(beta_a) c_li(beta_b)
    amps = np.einsum("ij,ai,bj->ab", joint, ca, cb)
    rates = pair_rate * np.abs(amps) ** 2
    records = _sample_grid(rates, det, seed)
    meta = {"seed": seed, "pair_rate": pair_rate, "width": width}
    meta.update(metadata or {})
    return ScanResult(("beta_a", "beta_b"), (orientations_a, orientations_b), records, meta)


def conditional_profile(scan: ScanResult, fixed_value: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Counts along axis 0 with axis 1 held at fixed_value, normalized to unit sum."""
    col = int(np.argmin(np.abs(scan.axis_values[1] - fixed_value)))
    counts = scan.counts()[:, col]
    total = counts.sum()
    if total <= 0:
        raise ValueError("conditional profile has no counts")
    return scan.axis_values[0], counts / total


def spiral_spectrum(scan: ScanResult) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Anti-diagonal (ell, -ell) slice of a square spiral scan.

    Returns (ells, ideal rates, counts).
    """
    ells_a, ells_b = scan.axis_values
    ideal = scan.ideal_rates()
    counts = scan.counts()
    out_i, out_c, kept = [], [], []
    for i, ell in enumerate(ells_a):
        j = np.nonzero(ells_b == -ell)[0]
        if len(j):
            kept.append(ell)
            out_i.append(ideal[i, int(j[0])])
            out_c.append(counts[i, int(j[0])])
    if not kept:
        raise ValueError("scan has no (ell, -ell) pairs")
    return np.asarray(kept), np.asarray(out_i), np.asarray(out_c)


def spectrum_fwhm(xs, ys) -> float:
    """Full width at half maximum of a sampled peak.

    Uses linear interpolation of the half-maximum crossings when both lie
    inside the sampled window; otherwise falls back to the width of a fitted
    Gaussian, which extrapolates sensibly for spectra wider than the window.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.max(ys) <= 0:
        raise ValueError("spectrum must have positive values")
    y = ys / np.max(ys)
    peak = int(np.argmax(y))
    above = y >= 0.5
    if not above[0] and not above[-1]:
        left = np.nonzero(~above[:peak])[0]
        right = np.nonzero(~above[peak:])[0]
        if len(left) and len(right):
            li = left[-1]
            ri = peak + right[0]
            xl = xs[li] + (0.5 - y[li]) / (y[li + 1] - y[li]) * (xs[li + 1] - xs[li])
            xr = xs[ri - 1] + (0.5 - y[ri - 1]) / (y[ri] - y[ri - 1]) * (xs[ri] - xs[ri - 1])
            return float(xr - xl)
    return fit_gaussian(xs, ys).fwhm


@dataclass(frozen=True)
class EprReidResult:
    """Conditional-variance product for the OAM / angular-position pair."""

    delta_ell_sq: float
    delta_phi_sq: float
    product: float
    violated: bool
    ell_fit: GaussianFit
    angle_fit: GaussianFit
    discrete_ell_var: float
    discrete_phi_var: float


def epr_reid(ell_profile, angle_profile, bound: float = 0.25) -> EprReidResult:
    """Conditional-variance product from fitted profile widths.

    Both profiles are (values, probabilities) pairs normalized to unit sum;
    the widths are the variances of fitted Gaussians, following the
    profile-fitting analysis of the measured spectra.  The correlations are
    nonclassical when the product falls below ``bound``.  The raw discrete
    variances are reported alongside for comparison.
    """
    results = []
    for xs, ps in (ell_profile, angle_profile):
        xs = np.asarray(xs, dtype=float)
        ps = np.asarray(ps, dtype=float)
        if abs(ps.sum() - 1.0) > 1e-6:
            raise ValueError("profiles must be normalized to unit sum")
        fit = fit_gaussian(xs, ps)
        mean = np.sum(xs * ps)
        results.append((fit, float(np.sum((xs - mean) ** 2 * ps))))
    (ell_fit, ell_disc), (angle_fit, angle_disc) = results
    product = ell_fit.variance * angle_fit.variance
    return EprReidResult(
        delta_ell_sq=ell_fit.variance,
        delta_phi_sq=angle_fit.variance,
        product=product,
        violated=bool(product < bound),
        ell_fit=ell_fit,
        angle_fit=angle_fit,
        discrete_ell_var=ell_disc,
        discrete_phi_var=angle_disc,
    )


@dataclass(frozen=True)
class BellSettings:
    """Analyzer orientations for the four-correlation Bell parameter.

    Orientations are taken modulo pi/ell, the period of the two-photon
    fringe in either analyzer angle.
    """

    ell: int
    theta_a: float
    theta_a_prime: float
    theta_b: float
    theta_b_prime: float

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("ell must be a positive integer")
        period = math.pi / self.ell
        for name in ("theta_a", "theta_a_prime", "theta_b", "theta_b_prime"):
            object.__setattr__(self, name, getattr(self, name) % period)

    @classmethod
    def canonical(cls, ell: int) -> "BellSettings":
        """The ell-scaled optimal orientations, giving S = 2 sqrt(2) ideally."""
        return cls(ell=ell, theta_a=0.0, theta_a_prime=math.pi / (4 * ell),
                   theta_b=math.pi / (8 * ell), theta_b_prime=3 * math.pi / (8 * ell))

    @property
    def shift(self) -> float:
        """Orientation shift that flips a correlation: pi / (2 ell)."""
        return math.pi / (2 * self.ell)

    def base_pairs(self):
        return ((self.theta_a, self.theta_b), (self.theta_a, self.theta_b_prime),
                (self.theta_a_prime, self.theta_b), (self.theta_a_prime, self.theta_b_prime))


def analyzer_ket(ell: int, theta: float) -> np.ndarray:
    """Superposition-analyzer ket over the {|+ell>, |-ell>} basis.

    Rotating the two-lobed analyzer hologram by theta advances the relative
    phase between the two helicities by 2*ell*theta.
    """
    return np.array([1.0, np.exp(2j * ell * theta)]) / math.sqrt(2.0)


def bell_probability(state: TwoPhotonState, ell: int, theta_a: float, theta_b: float) -> float:
    """Joint projection probability onto rotated analyzers, within the +-ell sector."""
    a_plus, a_minus = state.sector_ket(ell)
    va = analyzer_ket(ell, theta_a)
    vb = analyzer_ket(ell, theta_b)
    amp = a_plus * np.conj(va[0]) * np.conj(vb[1]) + a_minus * np.conj(va[1]) * np.conj(vb[0])
    return float(abs(amp) ** 2)


def bell_curve(state: TwoPhotonState, ell: int, theta_a: float, thetas_b,
               det: DetectorConfig, seed: int, pair_rate: float = 1e4,
               metadata: dict | None = None) -> ScanResult:
    """Coincidence fringe: analyzer A fixed at theta_a, analyzer B swept."""
    thetas_b = np.asarray(thetas_b, dtype=float)
    rates = pair_rate * np.array([bell_probability(state, ell, theta_a, tb) for tb in thetas_b])
    records = _sample_grid(rates, det, seed)
    meta = {"seed": seed, "pair_rate": pair_rate, "ell": ell, "theta_a": theta_a}
    meta.update(metadata or {})
    return ScanResult(("theta_b",), (thetas_b,), records, meta)


def bell_counts(state: TwoPhotonState, settings: BellSettings, det: DetectorConfig,
                seed: int, pair_rate: float = 1e4) -> tuple[np.ndarray, np.ndarray]:
    """Synthesize the 16 coincidence counts of the four-orientation pattern.

    Row k holds the counts for base pair k at orientation offsets
    (0, 0), (shift, shift), (shift, 0), (0, shift).  Returns (counts, ideal
    rates), both shaped (4, 4).
    """
    shift = settings.shift
    rates = np.zeros((4, 4))
    for k, (ta, tb) in enumerate(settings.base_pairs()):
        for c, (da, db) in enumerate(((0.0, 0.0), (shift, shift), (shift, 0.0), (0.0, shift))):
            rates[k, c] = pair_rate * bell_probability(state, settings.ell, ta + da, tb + db)
    counts = np.zeros((4, 4))
    for setting_id, idx in enumerate(np.ndindex(4, 4)):
        counts[idx] = sample_counts(float(rates[idx]), det, seed, setting_id=setting_id).count
    return counts, rates


def bell_parameter(counts, settings: BellSettings) -> tuple[float, float]:
    """Bell parameter S and its first-order Poisson uncertainty.

    ``counts`` is the (4, 4) array produced by :func:`bell_counts`: one row
    per base orientation pair, columns ordered (0,0), (+,+), (+,0), (0,+)
    where + is the pi/(2 ell) shift.  Each correlation is
    E = (C1 + C2 - C3 - C4) / (C1 + C2 + C3 + C4) and
    S = E(a,b) - E(a,b') + E(a',b) + E(a',b').  The uncertainty propagates
    independent Poisson errors sigma_C = sqrt(C) to first order.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (4, 4):
        raise ValueError("expected a (4, 4) array of coincidence counts")
    signs = (1.0, -1.0, 1.0, 1.0)
    s_value = 0.0
    s_var = 0.0
    for k in range(4):
        c = counts[k]
        total = c.sum()
        if total <= 0:
            raise ValueError(f"correlation {k} has zero total counts")
        e = (c[0] + c[1] - c[2] - c[3]) / total
        s_value += signs[k] * e
        s_var += ((1.0 - e) ** 2 * (c[0] + c[1]) + (1.0 + e) ** 2 * (c[2] + c[3])) / total**2
    return float(s_value), float(math.sqrt(s_var))


@dataclass(frozen=True)
class MeasurementSetting:
    """Joint projector: one analyzer ket per arm over the tomography basis."""

    index: int
    ket_a: np.ndarray
    ket_b: np.ndarray
    label_a: str
    label_b: str


_PHASE_LABELS = {0.0: "0", math.pi / 2: "pi/2", math.pi: "pi", 3 * math.pi / 2: "3pi/2"}


def arm_projectors(d: int, ell_values) -> list[tuple[np.ndarray, str]]:
    """Per-arm tomography states: d pure kets plus pairwise superpositions.

    For every unordered pair (i, j) the four relative phases 0, pi/2, pi,
    3pi/2 are included, giving the overcomplete set of 2d^2 - d states.
    """
    ell_values = [int(v) for v in ell_values]
    if len(ell_values) != d:
        raise ValueError("ell_values must contain exactly d entries")
    if len(set(ell_values)) != d:
        raise ValueError("ell_values must be distinct")
    states = []
    for i, ell in enumerate(ell_values):
        ket = np.zeros(d, dtype=complex)
        ket[i] = 1.0
        states.append((ket, f"l{ell:+d}"))
    for i, j in itertools.combinations(range(d), 2):
        for phase, label in _PHASE_LABELS.items():
            ket = np.zeros(d, dtype=complex)
            ket[i] = 1.0 / math.sqrt(2.0)
            ket[j] = np.exp(1j * phase) / math.sqrt(2.0)
            states.append((ket, f"(l{ell_values[i]:+d} + e^{{i {label}}} l{ell_values[j]:+d})"))
    return states


def tomography_settings(d: int, ell_values) -> list[MeasurementSetting]:
    """Joint settings for two-arm state tomography in a d-dimensional basis.

    The per-arm set is informationally (over-)complete, so the Cartesian
    product of (2d^2 - d)^2 joint projectors spans the full operator space of
    d^2 x d^2 density matrices.
    """
    if not 2 <= d <= 5:
        raise ValueError("local dimension d must lie in [2, 5]")
    arm = arm_projectors(d, ell_values)
    settings = []
    index = 0
    for ket_a, label_a in arm:
        for ket_b, label_b in arm:
            settings.append(MeasurementSetting(index=index, ket_a=ket_a, ket_b=ket_b,
                                               label_a=label_a, label_b=label_b))
            index += 1
    return settings


def run_tomography_experiment(rho, settings, det: DetectorConfig, seed: int,
                              flux: float = 1e4) -> list[CoincidenceRecord]:
    """Synthesize coincidence records for a tomography campaign.

    Each setting's ideal rate is flux * <ab| rho |ab>; counts are Poisson
    samples including detector efficiency and accidentals, reproducible per
    (seed, setting index).
    """
    matrix = rho.matrix if hasattr(rho, "matrix") else np.asarray(rho, dtype=complex)
    records = []
    for setting in settings:
        joint_ket = np.kron(setting.ket_a, setting.ket_b)
        prob = float(np.real(np.conj(joint_ket) @ matrix @ joint_ket))
        records.append(sample_counts(flux * max(prob, 0.0), det, seed, setting_id=setting.index))
    return records
