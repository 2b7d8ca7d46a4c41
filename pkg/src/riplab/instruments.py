"""Measurement instruments: the fixed vector (or matrix) each group orbit moves.

Normalization conventions, enforced at construction:
  vector instrument eta in C^N     : ||eta||_2 = sqrt(N)   (tol 1e-10)
  matrix instrument eta in C^{n,n} : ||eta||_S2 = n        (tol 1e-9)

These make the associated group averages isotropic, which is what every
downstream estimator assumes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import SeededRng, lq_norm, schatten_norm

__all__ = [
    "Instrument",
    "make_flat",
    "make_decaying_window",
    "make_scaled_identity",
    "make_schatten_decay",
    "make_custom",
    "instrument_norm",
    "instrument_to_json",
    "instrument_from_json",
]

_VEC_TOL = 1e-10
_MAT_TOL = 1e-9


@dataclass(frozen=True)
class Instrument:
    kind: str
    payload: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.payload, dtype=complex)
        object.__setattr__(self, "payload", p)
        if p.ndim == 1:
            n = p.size
            if n < 1:
                raise ValueError("vector instrument must be non-empty")
            norm = float(np.linalg.norm(p))
            if abs(norm - math.sqrt(n)) > _VEC_TOL * math.sqrt(n):
                raise ValueError(
                    f"vector instrument must satisfy ||eta||_2 = sqrt(N); got {norm:.12g} for N={n}"
                )
        elif p.ndim == 2:
            if p.shape[0] != p.shape[1]:
                raise ValueError("matrix instrument must be square")
            n = p.shape[0]
            norm = float(np.linalg.norm(p))  # Frobenius = Schatten-2
            if abs(norm - n) > _MAT_TOL * n:
                raise ValueError(
                    f"matrix instrument must satisfy ||eta||_S2 = n; got {norm:.12g} for n={n}"
                )
        else:
            raise ValueError("instrument payload must be a vector or a square matrix")

    @property
    def is_matrix(self) -> bool:
        return self.payload.ndim == 2

    @property
    def ambient_dim(self) -> int:
        """Dimension of the space measurements live in (n^2 for matrices)."""
        return int(self.payload.size)


def make_flat(n: int) -> Instrument:
    """All-ones vector of length N; the maximally spread instrument."""
    if n < 1:
        raise ValueError("N must be >= 1")
    return Instrument("flat", np.ones(n, dtype=complex), {"N": int(n)})


def make_decaying_window(n: int, n_window: int, alpha: float) -> Instrument:
    """Polynomially decaying window: entry j (1-based) is c * j^(-alpha) for
    j <= n_window and 0 beyond, with c chosen so ||eta||_2 = sqrt(N).

    Requires 0 < alpha < 1/2 and 1 <= n_window <= N.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    if not (1 <= n_window <= n):
        raise ValueError(f"window length must lie in [1, N]; got {n_window} for N={n}")
    if not (0.0 < alpha < 0.5):
        raise ValueError(f"decay exponent must lie in (0, 1/2); got {alpha}")
    j = np.arange(1, n_window + 1, dtype=float)
    profile = j ** (-alpha)
    c = math.sqrt(n / float(np.sum(profile**2)))
    payload = np.zeros(n, dtype=complex)
    payload[:n_window] = c * profile
    return Instrument(
        "decaying_window",
        payload,
        {"N": int(n), "N_window": int(n_window), "alpha": float(alpha)},
    )


def make_scaled_identity(n: int) -> Instrument:
    """sqrt(n) * Id_n, the flat matrix instrument (all singular values equal)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Instrument("scaled_identity", math.sqrt(n) * np.eye(n, dtype=complex), {"n": int(n)})


def _haar_unitary(n: int, rng: SeededRng) -> np.ndarray:
    # QR of a complex Ginibre matrix; fixing the R-diagonal phases makes Q Haar.
    g = rng.complex_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def make_schatten_decay(n: int, alpha: float, rng: SeededRng) -> Instrument:
    """Random matrix with singular values c * j^(-alpha), j = 1..n, scaled so
    ||eta||_S2 = n.  Singular vector frames are Haar unitaries.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < alpha < 0.5):
        raise ValueError(f"decay exponent must lie in (0, 1/2); got {alpha}")
    j = np.arange(1, n + 1, dtype=float)
    sv = j ** (-alpha)
    sv *= n / math.sqrt(float(np.sum(sv**2)))
    u = _haar_unitary(n, rng)
    v = _haar_unitary(n, rng)
    payload = (u * sv) @ v.conj().T
    return Instrument("schatten_decay", payload, {"n": int(n), "alpha": float(alpha)})


def make_custom(payload, params: dict | None = None) -> Instrument:
    """Wrap an arbitrary array; the normalization check still applies."""
    return Instrument("custom", np.asarray(payload, dtype=complex), dict(params or {}))


def instrument_norm(inst: Instrument, q: float) -> float:
    """l_q norm for vector instruments, Schatten-q norm for matrix ones."""
    if inst.is_matrix:
        return schatten_norm(inst.payload, q)
    return lq_norm(inst.payload, q)


# -- serialization ----------------------------------------------------------


def instrument_to_json(inst: Instrument) -> str:
    p = inst.payload
    entries = [[float(z.real), float(z.imag)] for z in p.ravel()]
    doc = {
        "kind": inst.kind,
        "params": inst.params,
        "shape": list(p.shape),
        "entries": entries,
    }
    return json.dumps(doc, sort_keys=True)


def instrument_from_json(text: str) -> Instrument:
    doc = json.loads(text)
    entries = np.array([complex(re, im) for re, im in doc["entries"]])
    payload = entries.reshape(doc["shape"])
    return Instrument(doc["kind"], payload, dict(doc.get("params", {})))
