"""Estimate reports: empirical constants with a grid-refinement series."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._io import write_csv

STABLE_TOL = 0.15
_ORDER = {"stable": 0, "inconclusive": 1, "diverging": 2}


def verdict_of(series) -> str:
    """``stable`` when the last two ratios agree within 15%, ``diverging`` when
    the ratio grows by more than 15% (or is not finite), else ``inconclusive``."""
    r = [float(v) for v in series]
    if len(r) < 2:
        return "inconclusive"
    r1, r2 = r[-2], r[-1]
    if not (np.isfinite(r1) and np.isfinite(r2)):
        return "diverging"
    if abs(r2 - r1) <= STABLE_TOL * r1 or (r1 == 0 and r2 == 0):
        return "stable"
    if r2 > (1 + STABLE_TOL) * r1:
        return "diverging"
    return "inconclusive"


@dataclass(frozen=True)
class EstimateReport:
    """Measured ratios ``lhs / rhs`` of one estimate.

    ``refinement_series[k]`` is the maximal ratio at grid density ``2^k``.
    A report built from several parameter slices keeps them in ``slices``;
    its series is the slice-wise maximum and its verdict the worst one.
    """

    estimate_id: str
    params: dict
    refinement_series: tuple
    witness: tuple = ()
    slices: tuple = ()
    verdict_override: str | None = field(default=None, repr=False)

    @property
    def max_ratio(self) -> float:
        return float(self.refinement_series[-1]) if self.refinement_series else float("nan")

    @property
    def verdict(self) -> str:
        if self.verdict_override is not None:
            return self.verdict_override
        if self.slices:
            return max((s.verdict for s in self.slices), key=_ORDER.__getitem__)
        return verdict_of(self.refinement_series)

    @classmethod
    def combine(cls, estimate_id, params, slices):
        slices = tuple(slices)
        n = min(len(s.refinement_series) for s in slices)
        series = tuple(max(float(s.refinement_series[k]) for s in slices) for k in range(n))
        worst = max(slices, key=lambda s: s.max_ratio)
        return cls(estimate_id, dict(params), series, worst.witness, slices)

    def rows(self):
        items = self.slices or (self,)
        for s in items:
            yield (
                self.estimate_id,
                ";".join(f"{k}={s.params[k]}" for k in sorted(s.params)),
                s.refinement_series[0] if s.refinement_series else float("nan"),
                s.refinement_series[-1] if s.refinement_series else float("nan"),
                s.max_ratio,
                " ".join(str(w) for w in s.witness),
                s.verdict,
            )

    def to_csv(self, path, chash="none"):
        cols = ["estimate_id", "params", "ratio_1x", "ratio_2x", "max_ratio", "witness", "verdict"]
        return write_csv(path, cols, self.rows(), chash)
