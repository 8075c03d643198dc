"""Problem instances: dimension, Riesz order and the subcritical power sum G."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml


class InadmissibleError(ValueError):
    """Raised when a configuration violates the admissibility conditions."""

    def __init__(self, report: "HypothesisReport"):
        self.report = report
        super().__init__("; ".join(report.messages) or "inadmissible parameters")


def exponent_bounds(N: int, alpha: float) -> tuple[float, float]:
    """Lower and upper critical exponents (N+alpha)/N and (N+alpha)/(N-2)."""
    if int(N) != N or N < 3:
        raise ValueError("dimension must be an integer >= 3")
    if not 0 < alpha < N:
        raise ValueError("alpha must lie in (0, N)")
    return (N + alpha) / N, (N + alpha) / (N - 2)


@dataclass(frozen=True)
class PowerTerm:
    q: float
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("coefficients must be positive")


@dataclass(frozen=True)
class HypothesisReport:
    h1_ok: bool
    h2_ok: bool
    h3_ok: bool
    h4_ok: bool
    messages: tuple[str, ...] = ()

    @property
    def admissible(self) -> bool:
        return self.h1_ok and self.h2_ok and self.h3_ok and self.h4_ok


@dataclass(frozen=True)
class ProblemParams:
    """One problem instance; duplicate exponents are merged by summing c."""

    N: int
    alpha: float
    terms: tuple[PowerTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.terms:
            raise ValueError("G needs at least one power term")
        merged: dict[float, float] = {}
        for t in self.terms:
            t = t if isinstance(t, PowerTerm) else PowerTerm(**t)
            merged[float(t.q)] = merged.get(float(t.q), 0.0) + float(t.c)
        terms = tuple(PowerTerm(q, c) for q, c in sorted(merged.items()))
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "alpha", float(self.alpha))
        exponent_bounds(self.N, self.alpha)

    @property
    def p(self) -> float:
        return (self.N + self.alpha) / (self.N - 2)

    @property
    def q1(self) -> float:
        return self.terms[0].q

    @property
    def q2(self) -> float:
        return self.terms[-1].q

    @property
    def a(self) -> float:
        return self.terms[0].c

    @property
    def b(self) -> float:
        return self.terms[-1].c

    @property
    def qs(self) -> np.ndarray:
        return np.array([t.q for t in self.terms])

    @property
    def cs(self) -> np.ndarray:
        return np.array([t.c for t in self.terms])

    def fractions(self) -> tuple[Fraction, Fraction, Fraction]:
        """(N, alpha, q2) as exact rationals (from their decimal representation)."""
        return Fraction(self.N), Fraction(repr(self.alpha)), Fraction(repr(self.q2))

    def to_dict(self) -> dict:
        return {"dimension": self.N, "alpha": self.alpha,
                "g_terms": [{"q": t.q, "c": t.c} for t in self.terms]}


def validate_hypotheses(params: ProblemParams) -> HypothesisReport:
    N, alpha = params.N, params.alpha
    lo, hi = exponent_bounds(N, alpha)
    msgs = []
    h1 = all(t.c > 0 for t in params.terms)
    if not h1:
        msgs.append("G must be positive for s > 0 (all coefficients > 0)")
    h2 = True
    for t in params.terms:
        if not lo < t.q < hi:
            h2 = False
            msgs.append(f"exponent q={t.q} outside the open window ({lo:.6g}, {hi:.6g})")
    h3 = True
    if N in (3, 4) and not params.q1 > 2:
        h3 = False
        msgs.append(f"smallest exponent q1={params.q1} must exceed 2 when N={N}")
    h4 = True
    if N == 4 and not params.q2 > 2:
        h4 = False
        msgs.append(f"largest exponent q2={params.q2} must exceed 2 when N=4")
    if N == 3 and not params.q2 > max(2.0, 1.0 + alpha):
        h4 = False
        msgs.append(f"largest exponent q2={params.q2} must exceed max(2, 1+alpha)="
                    f"{max(2.0, 1.0 + alpha):g} when N=3")
    return HypothesisReport(h1, h2, h3, h4, tuple(msgs))


def nonlinearity_eval(params: ProblemParams, s):
    """Return (F, F', G, g) at amplitude(s) s >= 0."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("amplitudes must be nonnegative")
    qs, cs = params.qs, params.cs
    sx = s[..., None]
    G = np.sum(cs * sx**qs, axis=-1)
    g = np.sum(cs * qs * sx ** (qs - 1), axis=-1)
    p = params.p
    return s**p + G, p * s ** (p - 1) + g, G, g


def params_from_dict(d: dict) -> ProblemParams:
    try:
        terms = tuple(PowerTerm(float(t["q"]), float(t["c"])) for t in d["g_terms"])
        return ProblemParams(int(d["dimension"]), float(d["alpha"]), terms)
    except KeyError as exc:
        raise ValueError(f"missing config key {exc}") from None


def load_config(path: str | Path) -> tuple[ProblemParams, dict]:
    """Read a YAML config; reject inadmissible parameter sets at load time."""
    raw = yaml.safe_load(Path(path).read_text()) or {}
    params = params_from_dict(raw)
    report = validate_hypotheses(params)
    if not report.admissible:
        raise InadmissibleError(report)
    return params, raw
