"""Function-space sampling experiments on the unit circle.

Functions are trigonometric polynomials carried by their Fourier
coefficients on k in [-N_big, N_big).  The derivative here is the
*normalized* one, acting as coeff_k -> k coeff_k; the physical derivative is
2 pi times that.  With this convention the harmonic-weight identities used by
the time-sampling scheme hold exactly: summing coeff_k / k blocks of the
derivative of g telescopes back to point evaluation of g.

Measurement schemes:
  block instruments     -- d contiguous frequency blocks of length L covering
                           [-N, N), deterministic or Rademacher-signed;
  time sampling         -- point evaluation of a DC-free function;
  dyadic blocks         -- harmonic-weight functionals grouped by octave.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .numerics import SeededRng
from .rip import RipReport

__all__ = [
    "FourierFunction",
    "Truncated",
    "InverseSquare",
    "CustomWeights",
    "weight_array",
    "standard_bump",
    "from_bumps",
    "evaluate",
    "values_on_grid",
    "shift",
    "differentiate",
    "weighted_seminorm",
    "lq_norm_function",
    "smooth_sparse_membership",
    "BlockInstrument",
    "make_block_instrument",
    "block_measure",
    "time_sample_measure",
    "dyadic_block_frequencies",
    "dyadic_measure",
    "covering_dyadic_level",
    "truncation_level",
    "BlockScheme",
    "TimeSampling",
    "DyadicScheme",
    "rip_experiment",
]

_DC_TOL = 1e-10


@dataclass(frozen=True)
class FourierFunction:
    """Trigonometric polynomial with coefficients on k in [-n_big, n_big).

    coeffs[i] is the coefficient of exp(2 pi i k t) for k = i - n_big.
    """

    coeffs: np.ndarray
    n_big: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if self.n_big < 1:
            raise ValueError("n_big must be >= 1")
        if c.shape != (2 * self.n_big,):
            raise ValueError(f"expected {2 * self.n_big} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def coeff(self, k: int) -> complex:
        if not (-self.n_big <= k < self.n_big):
            raise ValueError(f"frequency {k} outside [-{self.n_big}, {self.n_big})")
        return complex(self.coeffs[k + self.n_big])

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.n_big, self.n_big)

    def l2_norm(self) -> float:
        """L2 norm on the circle (Parseval)."""
        return float(np.linalg.norm(self.coeffs))

    def scaled(self, a: complex) -> "FourierFunction":
        return FourierFunction(self.coeffs * a, self.n_big)


# -- weights ------------------------------------------------------------------


@dataclass(frozen=True)
class Truncated:
    """Indicator weights of the frequency window [-n_cut, n_cut)."""

    n_cut: int

    def __post_init__(self):
        if self.n_cut < 1:
            raise ValueError("cutoff must be >= 1")


@dataclass(frozen=True)
class InverseSquare:
    """w_k = 1 / max(k^2, 1); the weight induced by harmonic functionals."""


@dataclass(frozen=True)
class CustomWeights:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or np.any(v < 0):
            raise ValueError("weights must be a non-negative vector")
        object.__setattr__(self, "values", v)


WeightSpec = Union[Truncated, InverseSquare, CustomWeights]


def weight_array(spec: WeightSpec, n_big: int) -> np.ndarray:
    k = np.arange(-n_big, n_big)
    if isinstance(spec, Truncated):
        if spec.n_cut > n_big:
            raise ValueError(f"cutoff {spec.n_cut} exceeds the carrier band {n_big}")
        return ((k >= -spec.n_cut) & (k < spec.n_cut)).astype(float)
    if isinstance(spec, InverseSquare):
        return 1.0 / np.maximum(k.astype(float) ** 2, 1.0)
    if isinstance(spec, CustomWeights):
        if spec.values.shape != (2 * n_big,):
            raise ValueError("custom weights must match the coefficient layout")
        return spec.values.copy()
    raise TypeError(f"unknown weight spec {type(spec).__name__}")


# -- construction --------------------------------------------------------------


def standard_bump(x) -> np.ndarray:
    """Smooth bump exp(1 - 1/(1 - 4 x^2)) supported on |x| < 1/2."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 0.5
    xi = x[inside]
    with np.errstate(over="ignore"):
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - 4.0 * xi**2))
    return out


def _circular_distance(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def from_bumps(
    t_scale: float,
    centers,
    amplitudes,
    n_big: int,
    bump: Optional[Callable] = None,
    oversample: int = 8,
) -> FourierFunction:
    """Superposition sum_j a_j T phi(T (t - c_j)) as a trigonometric polynomial.

    The dilated bumps have width 1/T, so centers must keep pairwise circular
    distance strictly above 1/T (this also rules out overlap across the wrap).
    Coefficients come from an oversampled quadrature with at least 8 n_big
    nodes, which is far beyond aliasing for these smooth profiles.
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=float)) % 1.0
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=complex))
    if centers.shape != amplitudes.shape:
        raise ValueError("centers and amplitudes must have matching lengths")
    if centers.size < 1:
        raise ValueError("at least one bump is required")
    if t_scale <= 1.0:
        raise ValueError("the dilation T must exceed 1 so a bump fits the circle")
    for i in range(centers.size):
        for j in range(i + 1, centers.size):
            if _circular_distance(centers[i], centers[j]) <= 1.0 / t_scale:
                raise ValueError(
                    f"bump centers {centers[i]:.6g} and {centers[j]:.6g} are closer "
                    f"than the bump width 1/T = {1.0 / t_scale:.6g}"
                )
    if oversample < 8:
        raise ValueError("oversample must be >= 8")
    profile = standard_bump if bump is None else bump

    m_quad = oversample * n_big
    t = np.arange(m_quad) / m_quad
    vals = np.zeros(m_quad, dtype=complex)
    for c, a in zip(centers, amplitudes):
        u = (t - c + 0.5) % 1.0 - 0.5
        vals += a * t_scale * profile(t_scale * u)
    spectrum = np.fft.fft(vals) / m_quad
    k = np.arange(-n_big, n_big)
    return FourierFunction(spectrum[k % m_quad], n_big)


# -- pointwise and norm operations ---------------------------------------------


def evaluate(f: FourierFunction, t):
    """Pointwise synthesis sum_k c_k exp(2 pi i k t); t scalar or array."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(2j * np.pi * np.outer(t_arr, f.frequencies))
    out = phases @ f.coeffs
    return complex(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def values_on_grid(f: FourierFunction, m_grid: int) -> np.ndarray:
    """Values at t = i/m_grid via zero-padded FFT synthesis."""
    if m_grid < 2 * f.n_big:
        raise ValueError("grid must be at least the coefficient band to avoid aliasing")
    spectrum = np.zeros(m_grid, dtype=complex)
    k = f.frequencies
    spectrum[k % m_grid] = f.coeffs
    return np.fft.ifft(spectrum) * m_grid


def shift(f: FourierFunction, t: float) -> FourierFunction:
    """Translate by t: (shift f)(x) = f(x - t)."""
    return FourierFunction(f.coeffs * np.exp(-2j * np.pi * f.frequencies * t), f.n_big)


def differentiate(f: FourierFunction, mode: str = "derivative") -> FourierFunction:
    """Normalized derivative (coeff_k -> k coeff_k) or its inverse.

    The antiderivative divides by k and requires a DC-free input; its own DC
    coefficient is fixed to zero.  Physical derivatives are 2 pi times the
    normalized one.
    """
    k = f.frequencies.astype(float)
    if mode == "derivative":
        return FourierFunction(f.coeffs * k, f.n_big)
    if mode == "antiderivative":
        scale = max(1.0, float(np.abs(f.coeffs).max()))
        if abs(f.coeff(0)) > _DC_TOL * scale:
            raise ValueError("antiderivative requires a DC-free function")
        out = np.zeros_like(f.coeffs)
        nz = k != 0
        out[nz] = f.coeffs[nz] / k[nz]
        return FourierFunction(out, f.n_big)
    raise ValueError(f"mode must be 'derivative' or 'antiderivative'; got {mode!r}")


def weighted_seminorm(f: FourierFunction, weights) -> float:
    """sqrt(sum_k w_k |c_k|^2) for a WeightSpec or an explicit weight vector."""
    if isinstance(weights, (Truncated, InverseSquare, CustomWeights)):
        w = weight_array(weights, f.n_big)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != f.coeffs.shape or np.any(w < 0):
            raise ValueError("weights must be non-negative and match the layout")
    return float(math.sqrt(float(np.sum(w * np.abs(f.coeffs) ** 2))))


def lq_norm_function(f: FourierFunction, q: float, oversample: int = 8) -> float:
    """L_q(0, 1) norm by uniform-grid quadrature with >= 8 n_big nodes.

    Documented relative accuracy 1e-6 for carriers up to n_big = 2048.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if oversample < 8:
        raise ValueError("oversample must be >= 8")
    vals = np.abs(values_on_grid(f, oversample * f.n_big))
    if q == math.inf:
        return float(vals.max())
    return float(np.mean(vals**q) ** (1.0 / q))


def smooth_sparse_membership(
    f: FourierFunction,
    rho_max: float,
    gamma_max: float,
    support_tol: float = 1e-8,
) -> dict:
    """Check membership in the smoothness/support model
    { ||f'||_L2 <= rho ||f||_L2,  lambda(supp f) <= gamma }.

    measured_rho uses the physical derivative (2 pi times the normalized
    one); measured_gamma is the fraction of quadrature nodes where |f|
    exceeds support_tol times its maximum.
    """
    if rho_max <= 0 or not (0 < gamma_max <= 1):
        raise ValueError("need rho_max > 0 and gamma_max in (0, 1]")
    l2 = f.l2_norm()
    if l2 < 1e-14:
        raise ValueError("membership is undefined for the zero function")
    deriv = differentiate(f, "derivative")
    measured_rho = 2.0 * math.pi * deriv.l2_norm() / l2
    vals = np.abs(values_on_grid(f, 8 * f.n_big))
    measured_gamma = float(np.mean(vals > support_tol * vals.max()))
    return {
        "member": bool(measured_rho <= rho_max and measured_gamma <= gamma_max),
        "measured_rho": measured_rho,
        "measured_gamma": measured_gamma,
    }


# -- measurement schemes --------------------------------------------------------


@dataclass(frozen=True)
class BlockInstrument:
    """d contiguous frequency blocks of length L tiling [-n_cut, n_cut).

    Deterministic blocks sum their frequencies with unit signs; Rademacher
    blocks share one +/-1 pattern of length L across all blocks.
    """

    n_cut: int
    block_len: int
    n_blocks: int
    mode: str
    signs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n_cut < 1 or self.block_len < 1:
            raise ValueError("cutoff and block length must be >= 1")
        if self.block_len * self.n_blocks != 2 * self.n_cut:
            raise ValueError("blocks must tile the window: L * d = 2 N")
        if self.mode not in ("deterministic", "rademacher"):
            raise ValueError("mode must be 'deterministic' or 'rademacher'")
        if self.mode == "rademacher":
            if self.signs is None:
                raise ValueError("rademacher mode needs a +/-1 sign vector of length L")
            s = np.asarray(self.signs)
            if s.shape != (self.block_len,) or not np.all(np.abs(s) == 1):
                raise ValueError("rademacher mode needs a +/-1 sign vector of length L")
            object.__setattr__(self, "signs", s.astype(float))
        elif self.signs is not None:
            raise ValueError("deterministic mode takes no signs")

    def frequency_grid(self) -> np.ndarray:
        """(d, L) array; row l holds the frequencies of block l."""
        return (-self.n_cut + np.arange(2 * self.n_cut)).reshape(self.n_blocks, self.block_len)


def make_block_instrument(
    n_cut: int,
    block_len: int,
    mode: str = "deterministic",
    rng: SeededRng | None = None,
) -> BlockInstrument:
    if (2 * n_cut) % block_len != 0:
        raise ValueError(f"block length {block_len} must divide 2 N = {2 * n_cut}")
    n_blocks = (2 * n_cut) // block_len
    signs = None
    if mode == "rademacher":
        if rng is None:
            raise ValueError("rademacher blocks need an RNG for the sign pattern")
        signs = rng.rademacher(block_len).astype(float)
    return BlockInstrument(n_cut, block_len, n_blocks, mode, signs)


def block_measure(f: FourierFunction, inst: BlockInstrument, t):
    """Measurement vector of the translate of f by t; one entry per block.

    Component l is sum_j s_j exp(-2 pi i k_{l,j} t) fhat(k_{l,j}).
    Scalar t gives shape (d,); an array of m translates gives (m, d).
    """
    if inst.n_cut > f.n_big:
        raise ValueError("function band does not cover the instrument window")
    ks = inst.frequency_grid()
    c = f.coeffs[ks + f.n_big]
    if inst.mode == "rademacher":
        c = c * inst.signs[None, :]
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(-2j * np.pi * t_arr[:, None, None] * ks[None, :, :])
    out = (phases * c[None, :, :]).sum(axis=2)
    return out[0] if np.asarray(t).ndim == 0 else out


def time_sample_measure(g: FourierFunction, t):
    """Point evaluation g(t) for DC-free g; the scalar sampling functional."""
    scale = max(1.0, float(np.abs(g.coeffs).max()))
    if abs(g.coeff(0)) > _DC_TOL * scale:
        raise ValueError("time sampling requires a DC-free function")
    return evaluate(g, t)


def dyadic_block_frequencies(level: int, n_big: int) -> np.ndarray:
    """Frequencies of dyadic level l: 2^(l-2) < |k| <= 2^(l-1) (level 0 is DC).

    Level 1 is exactly {-1, +1}.  Frequencies outside the carrier band are
    dropped.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if level == 0:
        return np.array([0])
    lo = 2.0 ** (level - 2)
    hi = 2 ** (level - 1)
    mags = np.arange(math.floor(lo) + 1, hi + 1)
    mags = mags[mags > lo]
    ks = np.concatenate([-mags[::-1], mags])
    return ks[(ks >= -n_big) & (ks < n_big)]


def dyadic_measure(g: FourierFunction, t, level: int):
    """Octave-l component of the translate of g: sum over the level's
    frequencies of exp(-2 pi i k t) ghat(k).

    This equals the harmonic-weight functional applied to the translated
    normalized derivative of g, so summing over all levels recovers point
    evaluation.
    """
    ks = dyadic_block_frequencies(level, g.n_big)
    if ks.size == 0:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        zero = np.zeros(t_arr.shape, dtype=complex)
        return complex(0) if np.asarray(t).ndim == 0 else zero
    c = g.coeffs[ks + g.n_big]
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.exp(-2j * np.pi * np.outer(t_arr, ks)) @ c
    return complex(out[0]) if np.asarray(t).ndim == 0 else out


def covering_dyadic_level(n_big: int) -> int:
    """Smallest level whose blocks reach every |k| < n_big."""
    return int(math.ceil(math.log2(max(2, n_big)))) + 1


def truncation_level(q: float, s: float, delta: float, c2: float) -> int:
    """Smallest l0 >= 1 with 2^(-2 l0 / q') <= delta / (2 c2 s), q' dual to q.

    This is the level beyond which the dyadic tail provably stays below
    delta/2 once the tail constant c2 is known.
    """
    if not (1.0 < q <= 2.0):
        raise ValueError("q must lie in (1, 2]")
    if s <= 0 or delta <= 0 or c2 <= 0:
        raise ValueError("s, delta, c2 must be positive")
    q_dual = q / (q - 1.0)
    ratio = delta / (2.0 * c2 * s)
    if ratio >= 1.0:
        return 1
    return max(1, int(math.ceil(round(q_dual / 2.0 * math.log2(1.0 / ratio), 12))))


# -- the sampling experiment -----------------------------------------------------


@dataclass(frozen=True)
class BlockScheme:
    instrument: BlockInstrument


@dataclass(frozen=True)
class TimeSampling:
    pass


@dataclass(frozen=True)
class DyadicScheme:
    max_level: int

    def __post_init__(self):
        if self.max_level < 0:
            raise ValueError("max_level must be >= 0")


Scheme = Union[BlockScheme, TimeSampling, DyadicScheme]


def _scheme_norm(f: FourierFunction, scheme: Scheme) -> float:
    if isinstance(scheme, BlockScheme):
        return weighted_seminorm(f, Truncated(scheme.instrument.n_cut))
    # Time sampling and dyadic blocks are unbiased for the plain L2 norm.
    return f.l2_norm()


def _scheme_energy(f: FourierFunction, scheme: Scheme, ts: np.ndarray) -> np.ndarray:
    if isinstance(scheme, BlockScheme):
        vals = block_measure(f, scheme.instrument, ts)
        return np.sum(np.abs(vals) ** 2, axis=1)
    if isinstance(scheme, TimeSampling):
        return np.abs(time_sample_measure(f, ts)) ** 2
    if isinstance(scheme, DyadicScheme):
        acc = np.zeros(ts.shape, dtype=float)
        for level in range(scheme.max_level + 1):
            acc += np.abs(dyadic_measure(f, ts, level)) ** 2
        return acc
    raise TypeError(f"unknown scheme {type(scheme).__name__}")


def rip_experiment(
    sampler: Callable[[SeededRng], FourierFunction],
    scheme: Scheme,
    m: int,
    trials: int,
    rng: SeededRng,
) -> RipReport:
    """Monte Carlo isometry-defect estimate for a translation-sampling scheme.

    Each trial draws a model function, normalizes it in the scheme's natural
    norm (functions below 1e-8 are redrawn), averages the measurement energy
    over m uniform translates, and records |average - 1|.  The report's
    delta_hat is the maximum over trials.
    """
    if m < 1 or trials < 1:
        raise ValueError("m and trials must be >= 1")
    devs = np.empty(trials)
    for trial in range(trials):
        stream = rng.stream(trial)
        f = sampler(stream)
        norm = _scheme_norm(f, scheme)
        attempts = 0
        while norm < 1e-8:
            attempts += 1
            if attempts > 100:
                raise ValueError("sampler keeps producing numerically zero functions")
            f = sampler(stream)
            norm = _scheme_norm(f, scheme)
        if isinstance(scheme, BlockScheme) and f.n_big < 4 * scheme.instrument.n_cut:
            raise ValueError("carrier band must be at least 4x the scheme cutoff")
        f = f.scaled(1.0 / norm)
        ts = stream.uniform(0.0, 1.0, m)
        energies = _scheme_energy(f, scheme, ts)
        devs[trial] = abs(float(energies.mean()) - 1.0)
    return RipReport(
        delta_hat=float(devs.max()),
        method="translation_monte_carlo",
        model=type(scheme).__name__,
        m=int(m),
        details={"trials": int(trials), "deviations": devs.tolist()},
    )
