"""Temporal Bell inequalities in count, probability and expectation form.

Each evaluator returns an :class:`InequalityReport`. Exact inputs give a
plain margin; sampled inputs (a :class:`CountTable`, or a :class:`ProbTable`
carrying per-pair run counts) also get a standard error and a z-score.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .errors import ConfigError
from .geometry import Config, Setting
from .records import CountTable, ProbTable

A, B, C = Setting.A, Setting.B, Setting.C

#: Exact margins at or below this count as satisfied (rounding slack).
EXACT_TOL = 1e-12
Z_VIOLATED = 5.0
Z_SUGGESTIVE = 3.0

VARIANTS = ("counts-6", "prob-7", "prob-8", "expect-10", "quantum-16", "quantum-18")


@dataclass
class InequalityReport:
    variant: str
    lhs: float
    bound: float
    margin: float
    violated: bool
    mode: str = "exact"
    std_error: Optional[float] = None
    z_score: Optional[float] = None
    status: str = "consistent"
    insufficient_statistics: bool = False
    normalization: Optional[str] = None
    degenerate: bool = False
    context: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def significance(margin: float, std_error: float) -> float:
    """z-score of a margin."""
    if not std_error > 0:
        raise ValueError(f"standard error must be positive, got {std_error!r}")
    return margin / std_error


def _classify(z: float, z_violated: float, z_suggestive: float) -> str:
    if z > z_violated:
        return "violated"
    if z >= z_suggestive:
        return "suggestive"
    return "consistent"


def _exact_report(variant: str, lhs: float, bound: float, **extra) -> InequalityReport:
    margin = lhs - bound
    violated = margin > EXACT_TOL
    return InequalityReport(variant, lhs, bound, margin, violated,
                            status="violated" if violated else "consistent", **extra)


def _sampled_report(variant: str, lhs: float, bound: float, var: float, insufficient: bool,
                    z_violated: float, z_suggestive: float, **extra) -> InequalityReport:
    margin = lhs - bound
    se = math.sqrt(var) if var > 0 else 0.0
    if insufficient:
        return InequalityReport(variant, lhs, bound, margin, False, mode="sampled", std_error=se,
                                status="insufficient-statistics", insufficient_statistics=True, **extra)
    if se == 0.0:
        # degenerate frequencies: nothing to scale by, fall back to the sign
        violated = margin > 0
        return InequalityReport(variant, lhs, bound, margin, violated, mode="sampled", std_error=0.0,
                                status="violated" if violated else "consistent", **extra)
    z = significance(margin, se)
    status = _classify(z, z_violated, z_suggestive)
    return InequalityReport(variant, lhs, bound, margin, status == "violated", mode="sampled",
                            std_error=se, z_score=z, status=status, **extra)


# -- count form -------------------------------------------------------------

def eval_counts_6(table: CountTable, z_violated: float = Z_VIOLATED,
                  z_suggestive: float = Z_SUGGESTIVE) -> InequalityReport:
    """``N[a+,c-] <= N[a+,b-] + N[b+,c-]`` as ``lhs = N1 - N2 - N3`` against 0.

    Poisson error ``sqrt(N1 + N2 + N3)``.
    """
    n1 = table.n(A, 1, C, -1)
    n2 = table.n(A, 1, B, -1)
    n3 = table.n(B, 1, C, -1)
    insufficient = min(table.pair_total(A, C), table.pair_total(A, B), table.pair_total(B, C)) == 0
    return _sampled_report("counts-6", float(n1 - n2 - n3), 0.0, float(n1 + n2 + n3), insufficient,
                           z_violated, z_suggestive, normalization="counts")


# -- probability forms ------------------------------------------------------

def _prob_form(variant: str, p: ProbTable, o1: int, o2: int, z_violated: float,
               z_suggestive: float) -> InequalityReport:
    cells = ((A, C), (A, B), (B, C))
    probs = [p.p(s, o1, t, o2) for s, t in cells]
    lhs = probs[0] - probs[1] - probs[2]
    if not p.sampled:
        return _exact_report(variant, lhs, 0.0, normalization="per-pair")
    ns = [p.runs(s, t) for s, t in cells]
    insufficient = min(ns) == 0
    var = 0.0 if insufficient else sum(q * (1.0 - q) / n for q, n in zip(probs, ns))
    return _sampled_report(variant, lhs, 0.0, var, insufficient, z_violated, z_suggestive,
                           normalization="per-pair")


def eval_prob_7(p: ProbTable, z_violated: float = Z_VIOLATED,
                z_suggestive: float = Z_SUGGESTIVE) -> InequalityReport:
    """``P(a+,c-) <= P(a+,b-) + P(b+,c-)``; margin is the left minus the right side."""
    return _prob_form("prob-7", p, 1, -1, z_violated, z_suggestive)


def eval_prob_8(p: ProbTable, z_violated: float = Z_VIOLATED,
                z_suggestive: float = Z_SUGGESTIVE) -> InequalityReport:
    """Sign-flipped twin of :func:`eval_prob_7`."""
    return _prob_form("prob-8", p, -1, 1, z_violated, z_suggestive)


# -- expectation form -------------------------------------------------------

def eval_expect_10(Eab: float, Ebc: float, Eac: float, std_error: Optional[float] = None,
                   z_violated: float = Z_VIOLATED, z_suggestive: float = Z_SUGGESTIVE) -> InequalityReport:
    """``E(a,b) + E(b,c) - E(a,c) <= 1``."""
    for name, e in (("E(a,b)", Eab), ("E(b,c)", Ebc), ("E(a,c)", Eac)):
        if not -1.0 - EXACT_TOL <= e <= 1.0 + EXACT_TOL:
            raise ValueError(f"{name} = {e!r} lies outside [-1, 1]")
    lhs = Eab + Ebc - Eac
    if std_error is None:
        return _exact_report("expect-10", lhs, 1.0)
    return _sampled_report("expect-10", lhs, 1.0, std_error ** 2, False, z_violated, z_suggestive)


def eval_expect_10_table(p: ProbTable, z_violated: float = Z_VIOLATED,
                         z_suggestive: float = Z_SUGGESTIVE) -> InequalityReport:
    """Expectation form with each E built from the four pair probabilities."""
    pairs = ((A, B), (B, C), (A, C))
    es = [p.expectation(s, t) for s, t in pairs]
    if not p.sampled:
        return eval_expect_10(*es)
    ns = [p.runs(s, t) for s, t in pairs]
    if min(ns) == 0:
        lhs = es[0] + es[1] - es[2]
        return _sampled_report("expect-10", lhs, 1.0, 0.0, True, z_violated, z_suggestive)
    # outcome products are +-1, so Var = 1 - E^2 per run
    var = sum(max(0.0, 1.0 - e * e) / n for e, n in zip(es, ns))
    return eval_expect_10(*es, std_error=math.sqrt(var), z_violated=z_violated, z_suggestive=z_suggestive)


# -- closed quantum forms ---------------------------------------------------

def quantum_lhs_16(config: Config) -> float:
    """``a.b - a.c + b.c``: the expectation form with E(x, y) = x.y."""
    ab, ac, bc = config.dots()
    return ab - ac + bc


def quantum_lhs_18(config: Config) -> float:
    """``b.(a+c) - 2 a.c + (a.b)(b.c)``: the (7) form for an |a+> initial state."""
    ab, ac, bc = config.dots()
    return ab + bc - 2.0 * ac + ab * bc


def quantum_report(config: Config, variant: str = "quantum-16") -> InequalityReport:
    fn = {"quantum-16": quantum_lhs_16, "quantum-18": quantum_lhs_18}.get(variant)
    if fn is None:
        raise ConfigError(f"no closed form for variant {variant!r}")
    return _exact_report(variant, fn(config), 1.0, degenerate=config.degenerate,
                         context={"config": config.to_dict()})


def prob7_margin_from_18(config: Config) -> float:
    """Predicted (7) margin under an |a+> preparation: ``(lhs18 - 1) / 4``."""
    return (quantum_lhs_18(config) - 1.0) / 4.0


def exact_reports(p: ProbTable, config: Optional[Config] = None) -> list[InequalityReport]:
    """(7), (8) and (10) from an exact probability table."""
    reports = [eval_prob_7(p), eval_prob_8(p), eval_expect_10_table(p)]
    if config is not None:
        for r in reports:
            r.degenerate = config.degenerate
    return reports


def sampled_reports(table: CountTable, config: Optional[Config] = None,
                    z_violated: float = Z_VIOLATED) -> list[InequalityReport]:
    """(6), (7), (8) and (10) estimated from observed counts."""
    p = table.probabilities()
    reports = [eval_counts_6(table, z_violated), eval_prob_7(p, z_violated),
               eval_prob_8(p, z_violated), eval_expect_10_table(p, z_violated)]
    if config is not None:
        for r in reports:
            r.degenerate = config.degenerate
    return reports
