"""Published convergence tables (reference values) and the acceptance bands checked against them.

Rows are (inv_h, e0, eg, gamma) for inv_h = 1, 2, 4, 8, 16, 32.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

# (case, domain, multiplier) -> rows
TABLES = {
    (1, "UnitSquare", "p1"): [
        (1, 0.006248, 0.1260, 3.36e-04), (2, 0.001470, 0.04477, 6.51e-04),
        (4, 1.39e-04, 0.01157, 2.84e-04), (8, 1.03e-05, 0.002843, 1.32e-04),
        (16, 6.97e-07, 7.02e-04, 6.43e-05), (32, 4.54e-08, 1.75e-04, 3.17e-05)],
    (1, "LShape", "p1"): [
        (1, 0.01676, 0.4804, 0.004498), (2, 0.002489, 0.1248, 0.001956),
        (4, 2.30e-04, 0.03100, 8.76e-04), (8, 1.94e-05, 0.007674, 4.13e-04),
        (16, 1.61e-06, 0.001907, 2.02e-04), (32, 1.37e-07, 4.75e-04, 9.99e-05)],
    (2, "BigSquare", "p1"): [
        (1, 0.6160, 2.554, 1.000), (2, 0.4621, 1.676, 0.8970),
        (4, 0.1389, 1.006, 3.270), (8, 0.02019, 0.1339, 0.6337),
        (16, 0.006505, 0.03229, 0.2249), (32, 0.001640, 0.007814, 0.09469)],
    (2, "BigSquare", "p0"): [
        (1, 0.1590, 0.7950, 0.07950), (2, 0.2253, 1.383, 0.3321),
        (4, 0.1963, 0.7627, 0.2444), (8, 0.06727, 0.2109, 0.1349),
        (16, 0.01536, 0.04616, 0.05452), (32, 0.003276, 0.01020, 0.02134)],
    (3, "UnitSquare", "p1"): [
        (1, 0.06193, 0.7395, 1.408), (2, 0.008210, 0.1116, 0.3570),
        (4, 0.001760, 0.04270, 0.2169), (8, 4.30e-04, 0.01483, 0.1351),
        (16, 1.05e-04, 0.005024, 0.08752), (32, 2.55e-05, 0.001681, 0.05735)],
    (3, "UnitSquare", "p0"): [
        (1, 0.003403, 0.4903, 0.0650), (2, 0.007769, 0.1774, 0.06253),
        (4, 0.002576, 0.06160, 0.04782), (8, 7.83e-04, 0.02099, 0.03270),
        (16, 2.19e-04, 0.007048, 0.02183), (32, 5.84e-05, 0.002349, 0.01447)],
    (3, "BigSquare", "p1"): [
        (1, 0.8998, 1.207, 0.4146), (2, 0.7142, 1.808, 2.289),
        (4, 0.1928, 1.244, 4.685), (8, 0.04503, 0.0967, 0.5329),
        (16, 0.02497, 0.05352, 0.3078), (32, 0.01242, 0.02806, 0.1958)],
    (3, "BigSquare", "p0"): [
        (1, 0.682, 0.5800, 0.1091), (2, 0.613, 0.7084, 0.08120),
        (4, 0.254, 0.4067, 0.05057), (8, 0.112, 0.2177, 0.04179),
        (16, 0.0512, 0.1101, 0.02969), (32, 0.02354, 0.05402, 0.02011)],
}


@dataclass(frozen=True)
class Check:
    """One acceptance band.

    ``kind="order"`` tests the final observed order of ``column`` against
    [lo, hi] (hi may be None); ``kind="absolute"`` tests the value at ``inv_h``
    against ``reference`` within a factor ``hi``.
    """

    column: str
    kind: str
    lo: Optional[float] = None
    hi: Optional[float] = None
    inv_h: Optional[int] = None
    reference: Optional[float] = None

    def describe(self) -> str:
        if self.kind == "order":
            hi = "inf" if self.hi is None else f"{self.hi:g}"
            return f"final order {self.column} in [{self.lo:g}, {hi}]"
        return f"{self.column} at inv_h={self.inv_h} within x{self.hi:g} of {self.reference:.3g}"

    def evaluate(self, table) -> tuple[bool, Optional[float]]:
        if self.kind == "order":
            value = table.final_order(self.column)
            if value is None:
                return False, None
            ok = value >= self.lo and (self.hi is None or value <= self.hi)
            return ok, value
        rows = [r for r in table.rows if r.inv_h == self.inv_h]
        if not rows:
            return False, None
        value = getattr(rows[0], self.column)
        ratio = value / self.reference
        return (1.0 / self.hi <= ratio <= self.hi), value


def _bands(e0, eg=None, gamma=None):
    out = []
    for col, band in (("e0", e0), ("eg", eg), ("gamma", gamma)):
        if band is not None:
            out.append(Check(col, "order", *band))
    return out


CHECKS = {
    (1, "UnitSquare", "p1"): _bands((3.5, None), (1.8, 2.2), (0.8, 1.25))
    + [Check("eg", "absolute", hi=3.0, inv_h=16, reference=7.02e-4)],
    (1, "LShape", "p1"): _bands((3.0, None), (1.8, 2.2), (0.8, 1.25)),
    (2, "BigSquare", "p1"): _bands((1.6, 2.4), (1.7, 2.4), (0.9, 1.6))
    + [Check("e0", "absolute", hi=3.0, inv_h=32, reference=1.640e-3)],
    (2, "BigSquare", "p0"): _bands((1.8, 2.6), None, (1.0, 1.7)),
    (3, "UnitSquare", "p1"): _bands((1.7, 2.3), (1.4, 1.8), (0.4, 0.8)),
    (3, "UnitSquare", "p0"): _bands((1.6, 2.1), (1.4, 1.8), (0.4, 0.8)),
    (3, "BigSquare", "p1"): _bands((0.8, 1.3), (0.8, 1.3), (0.4, 0.9)),
    (3, "BigSquare", "p0"): _bands((0.8, 1.3), (0.8, 1.3), (0.4, 0.9)),
}

# the default depth of every published table
TABLE_LEVELS = 5


def compare(table, case: int, domain: str, multiplier: str):
    """Evaluate the stored bands; returns a list of (check, passed, value)."""
    key = (case, domain, multiplier)
    if key not in CHECKS:
        return []
    return [(c, *c.evaluate(table)) for c in CHECKS[key]]
