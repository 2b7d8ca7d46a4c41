"""Sparsity models and the instrument-dependent sparsity parameter.

A model describes a set of unit-norm signals:

* ``Canonical(k)``        -- at most k nonzero coordinates.
* ``LqCap(q, s)``         -- ||x||_q <= sqrt(s) ||x||_2 (1 <= q <= 2).
* ``LowRank(r)``          -- n x n matrices of rank <= r, unit Frobenius norm.
* ``TensorRank(s, n, d)`` -- sums of s elementary d-fold tensors over C^n.

``sample_sparse`` draws canonical witnesses from each family, always returned
as flattened unit vectors so measurement operators apply uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .instruments import Instrument, instrument_norm
from .numerics import SeededRng, lq_norm, schatten_norm

__all__ = [
    "Canonical",
    "LqCap",
    "LowRank",
    "TensorRank",
    "SparsityModel",
    "sparsity_level",
    "max_sparsity_level",
    "witness_support_size",
    "sample_sparse",
    "project_witness",
    "SparsityCurve",
    "sparsity_parameter_value",
    "optimize_sparsity_parameter",
]


@dataclass(frozen=True)
class Canonical:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class LqCap:
    q: float
    s: float

    def __post_init__(self):
        if not (1.0 <= self.q <= 2.0):
            raise ValueError(f"q must lie in [1, 2]; got {self.q}")
        if self.s < 1.0:
            raise ValueError(f"the l_q cap is empty for s < 1; got s={self.s}")


@dataclass(frozen=True)
class LowRank:
    r: int

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("rank must be >= 1")


@dataclass(frozen=True)
class TensorRank:
    s: int
    n: int
    d: int

    def __post_init__(self):
        if self.s < 1 or self.n < 1 or self.d < 1:
            raise ValueError("tensor rank, mode size and order must all be >= 1")


SparsityModel = Union[Canonical, LqCap, LowRank, TensorRank]


def sparsity_level(x, q: float) -> float:
    """(||x||_q / ||x||_2)^2 for vectors, the Schatten analogue for matrices.

    This is the smallest s for which x belongs to the q-cap model.
    """
    x = np.asarray(x)
    if not np.any(x):
        raise ValueError("sparsity level of the zero vector is undefined")
    if x.ndim == 2:
        return (schatten_norm(x, q) / schatten_norm(x, 2)) ** 2
    return (lq_norm(x, q) / lq_norm(x, 2)) ** 2


def max_sparsity_level(q: float, n: int) -> float:
    """Largest attainable level in ambient dimension N: N^(2/q - 1)."""
    if not (1.0 <= q <= 2.0):
        raise ValueError(f"q must lie in [1, 2]; got {q}")
    if n < 1:
        raise ValueError("N must be >= 1")
    return float(n) ** (2.0 / q - 1.0)


def witness_support_size(q: float, s: float, n: int) -> int:
    """Largest support size j with j^(2/q - 1) <= s, capped at N.

    A flat-modulus vector on j coordinates has sparsity level exactly
    j^(2/q - 1), so this is the extremal flat witness for the q-cap.
    """
    if s < 1.0:
        raise ValueError("no witness exists for s < 1")
    if q == 2.0:
        return n
    j = int(math.floor(s ** (1.0 / (2.0 / q - 1.0))))
    return max(1, min(n, j))


def _unit(x: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return x / nrm


def sample_sparse(model: SparsityModel, ambient: int, rng: SeededRng) -> np.ndarray:
    """Random unit-norm member of the model's witness family, flattened.

    ambient is the flattened dimension (N, n^2 for matrices, n^d for tensors).
    """
    if isinstance(model, Canonical):
        if model.k > ambient:
            raise ValueError(f"k={model.k} exceeds ambient dimension {ambient}")
        support = rng.choice_no_replace(ambient, model.k)
        x = np.zeros(ambient, dtype=complex)
        x[support] = rng.complex_normal(model.k)
        return _unit(x)

    if isinstance(model, LqCap):
        j = witness_support_size(model.q, model.s, ambient)
        support = rng.choice_no_replace(ambient, j)
        x = np.zeros(ambient, dtype=complex)
        x[support] = rng.unit_phases(j) / math.sqrt(j)
        return x

    if isinstance(model, LowRank):
        n = math.isqrt(ambient)
        if n * n != ambient:
            raise ValueError("low-rank ambient dimension must be a perfect square")
        if model.r > n:
            raise ValueError(f"rank {model.r} exceeds matrix side {n}")
        a = rng.complex_normal((n, model.r)) @ rng.complex_normal((model.r, n))
        return _unit(a.ravel())

    if isinstance(model, TensorRank):
        if model.n**model.d != ambient:
            raise ValueError("tensor ambient dimension must equal n^d")
        acc = np.zeros(ambient, dtype=complex)
        for _ in range(model.s):
            term = np.ones(1, dtype=complex)
            for _ in range(model.d):
                term = np.multiply.outer(term, rng.complex_normal(model.n)).ravel()
            acc += term
        return _unit(acc)

    raise TypeError(f"unknown sparsity model {type(model).__name__}")


# -- witness projections (used by the ascent refinement in rip) -------------


def _top_support(z: np.ndarray, k: int) -> np.ndarray:
    return np.argpartition(np.abs(z), len(z) - k)[len(z) - k:]


def _rank1_tensor_fit(resid: np.ndarray, n: int, d: int, iters: int = 12):
    """Alternating power iterations for the dominant elementary tensor."""
    t = resid.reshape((n,) * d)
    factors = []
    flat_abs = np.abs(resid)
    lead = int(np.argmax(flat_abs))
    idx = np.unravel_index(lead, (n,) * d)
    for mode in range(d):
        e = np.zeros(n, dtype=complex)
        e[idx[mode]] = 1.0
        factors.append(e)
    for _ in range(iters):
        for mode in range(d):
            contracted = t
            for other in range(d - 1, -1, -1):
                if other == mode:
                    continue
                contracted = np.tensordot(contracted, np.conj(factors[other]), axes=([other], [0]))
            nrm = np.linalg.norm(contracted)
            if nrm == 0:
                return factors, 0.0
            factors[mode] = contracted / nrm
    weight = t
    for mode in range(d - 1, -1, -1):
        weight = np.tensordot(weight, np.conj(factors[mode]), axes=([mode], [0]))
    return factors, complex(weight)


def project_witness(model: SparsityModel, z, ambient: int) -> np.ndarray:
    """Map an arbitrary vector to a nearby unit member of the witness family."""
    z = np.asarray(z, dtype=complex).ravel()
    if z.size != ambient:
        raise ValueError("dimension mismatch")
    if not np.any(z):
        raise ValueError("cannot project the zero vector")

    if isinstance(model, Canonical):
        keep = _top_support(z, min(model.k, ambient))
        x = np.zeros(ambient, dtype=complex)
        x[keep] = z[keep]
        return _unit(x)

    if isinstance(model, LqCap):
        j = witness_support_size(model.q, model.s, ambient)
        keep = _top_support(z, j)
        x = np.zeros(ambient, dtype=complex)
        mags = np.abs(z[keep])
        phases = np.where(mags > 0, z[keep] / np.where(mags > 0, mags, 1.0), 1.0)
        x[keep] = phases / math.sqrt(j)
        return x

    if isinstance(model, LowRank):
        n = math.isqrt(ambient)
        a = z.reshape(n, n)
        u, sv, vh = np.linalg.svd(a, full_matrices=False)
        r = min(model.r, n)
        a = (u[:, :r] * sv[:r]) @ vh[:r]
        return _unit(a.ravel())

    if isinstance(model, TensorRank):
        resid = z.copy()
        acc = np.zeros(ambient, dtype=complex)
        for _ in range(model.s):
            factors, weight = _rank1_tensor_fit(resid, model.n, model.d)
            if weight == 0:
                break
            term = np.ones(1, dtype=complex)
            for f in factors:
                term = np.multiply.outer(term, f).ravel()
            acc += weight * term
            resid = resid - weight * term
        if not np.any(acc):
            return _unit(z)  # degenerate fit; fall back to the raw direction
        return _unit(acc)

    raise TypeError(f"unknown sparsity model {type(model).__name__}")


# -- the instrument-dependent sparsity parameter -----------------------------


@dataclass(frozen=True)
class SparsityCurve:
    """Objective values q' |-> (q')^3 r^(1 - 2/q') ||eta||_{q'}^2 on a grid."""

    q_grid: tuple
    values: tuple
    q_opt: float
    value: float


def sparsity_parameter_value(inst: Instrument, r: float, q_prime: float) -> float:
    """Objective at a single exponent q' in (2, inf)."""
    if r <= 0:
        raise ValueError("r must be positive")
    if not (q_prime > 2.0):
        raise ValueError(f"q' must exceed 2; got {q_prime}")
    if q_prime == math.inf:
        raise ValueError("evaluate the capped infinity entry via optimize_sparsity_parameter")
    return q_prime**3 * r ** (1.0 - 2.0 / q_prime) * instrument_norm(inst, q_prime) ** 2


def optimize_sparsity_parameter(
    inst: Instrument,
    r: float,
    q_min: float = 2.001,
    q_max: float = 128.0,
    points: int = 200,
    include_inf: bool = True,
) -> SparsityCurve:
    """Minimize the sparsity-parameter objective over a log-spaced grid.

    The grid covers (2, q_max]; the optional infinity entry uses the limiting
    norm ||eta||_inf with the cubic factor capped at q_max^3 (the literal
    limit diverges, so the entry is reported as a capped candidate only).
    Ties resolve to the smaller exponent.
    """
    if not (2.0 < q_min < q_max):
        raise ValueError("need 2 < q_min < q_max")
    if points < 2:
        raise ValueError("grid needs at least 2 points")
    grid = list(np.geomspace(q_min, q_max, points))
    values = [sparsity_parameter_value(inst, r, q) for q in grid]
    if include_inf:
        grid.append(math.inf)
        values.append(q_max**3 * float(r) * instrument_norm(inst, math.inf) ** 2)
    best = int(np.argmin(values))  # argmin takes the first hit: smaller q' wins ties
    return SparsityCurve(
        q_grid=tuple(float(q) for q in grid),
        values=tuple(float(v) for v in values),
        q_opt=float(grid[best]),
        value=float(values[best]),
    )
