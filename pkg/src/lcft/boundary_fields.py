"""Random Fourier boundary fields on the circle and half circle.

A field on the circle is the real trigonometric series

    phi(theta) = c + sum_{n>=1} (x_n cos(n theta) - y_n sin(n theta)) / sqrt(n)

with Fourier modes phi_n = (x_n + i y_n)/(2 sqrt(n)) and phi_{-n} the
conjugate.  On the half circle [0, pi] only the even (cosine) part
survives:

    phi(theta) = c + sum_{n>=1} sqrt(2) x_n cos(n theta) / sqrt(n).

Under the reference Gaussian measure all mode coordinates x_n, y_n are
independent standard normals; the zero mode c carries an improper
Lebesgue law unless a proper c-law is configured.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CircleField",
    "HalfCircleField",
    "FieldMeasure",
    "RngStream",
    "covariance_circle",
    "covariance_half",
    "covariance_circle_series",
    "covariance_half_series",
    "pairing_2",
    "rotate",
    "sample",
    "sobolev_norm",
]


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream keyed by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class CircleField:
    """Field on the full circle: zero mode c plus (x_n, y_n) coordinates."""

    c: float
    x: np.ndarray  # shape (n_cut,), coordinate of cos(n theta)/sqrt(n)
    y: np.ndarray  # shape (n_cut,), coordinate of -sin(n theta)/sqrt(n)

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=float)))
        if self.x.shape != self.y.shape:
            raise ValueError("x and y mode arrays must have equal length")

    @property
    def n_cut(self) -> int:
        return len(self.x)

    def evaluate(self, theta):
        """Pointwise values of the truncated series (vectorized in theta)."""
        theta = np.asarray(theta, dtype=float)
        n = np.arange(1, self.n_cut + 1)
        ang = np.multiply.outer(theta, n)  # (..., n_cut)
        inv = 1.0 / np.sqrt(n)
        vals = self.c + np.cos(ang) @ (self.x * inv) - np.sin(ang) @ (self.y * inv)
        return vals if vals.shape else float(vals)

    def to_json(self, seed=None) -> str:
        doc = {
            "kind": "circle",
            "c": self.c,
            "modes": [[float(a), float(b)] for a, b in zip(self.x, self.y)],
            "n_cut": self.n_cut,
        }
        if seed is not None:
            doc["seed"] = seed
        return json.dumps(doc)


@dataclass(frozen=True)
class HalfCircleField:
    """Even field on the half circle: zero mode c plus cosine coordinates x_n."""

    c: float
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))

    @property
    def n_cut(self) -> int:
        return len(self.x)

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=float)
        n = np.arange(1, self.n_cut + 1)
        ang = np.multiply.outer(theta, n)
        vals = self.c + np.cos(ang) @ (self.x * (math.sqrt(2.0) / np.sqrt(n)))
        return vals if vals.shape else float(vals)

    def to_json(self, seed=None) -> str:
        doc = {
            "kind": "half_circle",
            "c": self.c,
            "modes": [float(a) for a in self.x],
            "n_cut": self.n_cut,
        }
        if seed is not None:
            doc["seed"] = seed
        return json.dumps(doc)


def field_from_json(text: str):
    doc = json.loads(text)
    if doc["kind"] == "circle":
        modes = np.asarray(doc["modes"], dtype=float)
        if len(modes) == 0:
            modes = modes.reshape(0, 2)
        return CircleField(c=float(doc["c"]), x=modes[:, 0], y=modes[:, 1])
    if doc["kind"] == "half_circle":
        return HalfCircleField(c=float(doc["c"]), x=np.asarray(doc["modes"], dtype=float))
    raise ValueError(f"unknown field kind {doc['kind']!r}")


@dataclass(frozen=True)
class FieldMeasure:
    """Reference Gaussian measure for boundary fields.

    ``kind`` selects circle or half_circle mode structure.  With
    ``includes_zero_mode`` the c-direction carries Lebesgue measure,
    which cannot be sampled: callers must configure a proper ``c_law``
    (("fixed", value) or ("gaussian", mean, std)) or sampling raises.
    """

    kind: str  # "circle" | "half_circle"
    includes_zero_mode: bool = False
    c_law: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("circle", "half_circle"):
            raise ValueError(f"kind must be 'circle' or 'half_circle', got {self.kind!r}")


def sample(measure: FieldMeasure, n_cut: int, rng: RngStream | np.random.Generator):
    """Draw a field from the reference measure at cutoff n_cut.

    Mode coordinates are i.i.d. standard normal.  The zero mode follows
    the configured c-law; an improper (Lebesgue) zero mode cannot be
    sampled and raises ValueError.
    """
    if n_cut < 1:
        raise ValueError(f"n_cut must be >= 1, got {n_cut}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng

    if not measure.includes_zero_mode:
        c = 0.0
    elif measure.c_law is None:
        raise ValueError(
            "zero mode carries an improper dc law; configure c_law to sample"
        )
    elif measure.c_law[0] == "fixed":
        c = float(measure.c_law[1])
    elif measure.c_law[0] == "gaussian":
        _, mean, std = measure.c_law
        c = float(mean + std * gen.standard_normal())
    else:
        raise ValueError(f"unknown c_law {measure.c_law!r}")

    if measure.kind == "circle":
        return CircleField(c=c, x=gen.standard_normal(n_cut), y=gen.standard_normal(n_cut))
    return HalfCircleField(c=c, x=gen.standard_normal(n_cut))


def covariance_circle(theta, theta_p):
    """Covariance -log|e^{i a} - e^{i b}| of the circle field."""
    theta = np.asarray(theta, dtype=float)
    theta_p = np.asarray(theta_p, dtype=float)
    chord = np.abs(2.0 * np.sin((theta - theta_p) / 2.0))
    if np.any(chord == 0.0):
        raise ValueError("covariance diverges at coincident points")
    out = -np.log(chord)
    return out if out.shape else float(out)


def covariance_half(theta, theta_p):
    """Covariance -log(|e^{ia}-e^{ib}| |e^{ia}-e^{-ib}|) of the even field."""
    theta = np.asarray(theta, dtype=float)
    theta_p = np.asarray(theta_p, dtype=float)
    c1 = np.abs(2.0 * np.sin((theta - theta_p) / 2.0))
    c2 = np.abs(2.0 * np.sin((theta + theta_p) / 2.0))
    if np.any(c1 * c2 == 0.0):
        raise ValueError("covariance diverges at singular configuration")
    out = -(np.log(c1) + np.log(c2))
    return out if out.shape else float(out)


def covariance_circle_series(theta, theta_p, n_cut):
    """Truncated series sum_{n<=n_cut} cos(n(theta-theta_p))/n.

    This is the exact covariance of a cutoff circle field and the
    Monte-Carlo oracle for sampled fields.
    """
    n = np.arange(1, n_cut + 1)
    d = np.asarray(theta, dtype=float) - np.asarray(theta_p, dtype=float)
    out = np.cos(np.multiply.outer(d, n)) @ (1.0 / n)
    return out if out.shape else float(out)


def covariance_half_series(theta, theta_p, n_cut):
    """Truncated series sum_{n<=n_cut} (2/n) cos(n theta) cos(n theta')."""
    n = np.arange(1, n_cut + 1)
    a = np.cos(np.multiply.outer(np.asarray(theta, dtype=float), n))
    b = np.cos(np.multiply.outer(np.asarray(theta_p, dtype=float), n))
    out = (a * b) @ (2.0 / n)
    return out if out.shape else float(out)


def _pair_one(f, g) -> float:
    if isinstance(f, CircleField) != isinstance(g, CircleField):
        raise ValueError("pairing_2: mismatched field kinds")
    if f.n_cut != g.n_cut:
        raise ValueError("pairing_2: mismatched cutoffs")
    n = np.arange(1, f.n_cut + 1)
    if isinstance(f, CircleField):
        # (1/2pi) * integral over the full circle
        return f.c * g.c + float(np.sum((f.x * g.x + f.y * g.y) / (2.0 * n)))
    # half circle enters the total pairing with an explicit 1/2 weight:
    # (1/2) * (1/pi) * integral over [0, pi]
    return 0.5 * f.c * g.c + float(np.sum(f.x * g.x / (2.0 * n)))


def pairing_2(a, b) -> float:
    """Total L2 pairing of boundary data on a union of (half-)circles.

    ``a`` and ``b`` are single fields or matching sequences of fields
    (one per boundary component).  Full circles contribute the
    (1/2pi)-normalized integral; each half circle enters with an extra
    1/2 so that a constant on one half circle pairs to 1/2.
    """
    if isinstance(a, (CircleField, HalfCircleField)):
        a, b = [a], [b]
    if len(a) != len(b):
        raise ValueError("pairing_2: component count mismatch")
    return sum(_pair_one(f, g) for f, g in zip(a, b))


def rotate(f: CircleField, angle: float) -> CircleField:
    """Rotation action: evaluate(rotate(f, v), theta) == evaluate(f, theta + v)."""
    n = np.arange(1, f.n_cut + 1)
    cs, sn = np.cos(n * angle), np.sin(n * angle)
    return CircleField(c=f.c, x=cs * f.x - sn * f.y, y=sn * f.x + cs * f.y)


def sobolev_norm(f, s: float) -> float:
    """Squared Sobolev norm c^2 + sum |phi_n|^2 (|n|+1)^{2s} over represented modes."""
    n = np.arange(1, f.n_cut + 1)
    w = (n + 1.0) ** (2.0 * s)
    if isinstance(f, CircleField):
        # |phi_n|^2 = (x^2+y^2)/(4n), counted for both +n and -n
        return f.c**2 + float(np.sum((f.x**2 + f.y**2) / (2.0 * n) * w))
    return f.c**2 + float(np.sum(f.x**2 / n * w))
