"""Testable restrictions and internal consistency checks on derivative
tables.

All statistics are reported, never auto-rejected; pass/fail thresholds live
in the scenario runner because the underlying restrictions are population
inequalities, not finite-precision tests.
"""

from __future__ import annotations

from dataclasses import dataclass

from .exceptions import ConfigurationError, RelevanceError
from .recovery import DEFAULT_TAU_REL


@dataclass(frozen=True)
class DiagnosticsReport:
    cauchy_schwarz_stat: float | None
    symmetry_residual: float
    symmetry_applicable: bool
    relevance_map: dict
    sign_beta11: str
    complementarity_signs: list | None

    def as_rows(self):
        """Flat (statistic, value) rows for reporting."""
        rows = []
        if self.cauchy_schwarz_stat is not None:
            rows.append(("cauchy_schwarz_stat", f"{self.cauchy_schwarz_stat:.17g}"))
        rows.append(("symmetry_residual", f"{self.symmetry_residual:.17g}"))
        rows.append(("symmetry_applicable", str(self.symmetry_applicable).lower()))
        rows.append(("sign_beta11", self.sign_beta11))
        if self.complementarity_signs is not None:
            for j, row in enumerate(self.complementarity_signs, start=1):
                for k, s in enumerate(row, start=1):
                    rows.append((f"complementarity_sign_{j}_{k}", str(s)))
        for gamma, (k, idx, mag) in sorted(self.relevance_map.items()):
            rows.append((f"relevance_{'_'.join(map(str, gamma))}", f"k={k};{idx};{mag:.17g}"))
        return rows


def cauchy_schwarz_check(table, tau_rel=DEFAULT_TAU_REL):
    """Product of second-derivative ratios that model-consistent data keeps
    at or above one (an exact Cauchy-Schwarz bound on second moments)."""
    if len(table.dims) < 2:
        raise ConfigurationError("the check needs at least two goods")
    if 2 not in table.orders:
        raise ConfigurationError("the check needs second-order entries")
    own_1 = table.value(2, ((1, 1), (1, 1)))
    cross_1 = table.value(1, ((1, 1), (2, 1)))
    own_2 = table.value(1, ((2, 1), (2, 1)))
    cross_2 = table.value(2, ((1, 1), (2, 1)))
    for name, den in (("cross_1", cross_1), ("cross_2", cross_2)):
        if abs(den) <= tau_rel:
            raise RelevanceError(f"denominator {name} has magnitude {abs(den):.3e}")
    return (own_1 / cross_1) * (own_2 / cross_2)


def symmetry_check(table, tau_rel=DEFAULT_TAU_REL):
    """Max relative spread among estimates of one derivative stored under
    different differentiation orderings.

    Symmetry of mixed partials makes every ordering estimate the same
    object, so the spread flags corrupted or inconsistent entries.  Returns
    (residual, applicable); tables with only first-order entries have no
    ordering pairs and report (0.0, False).
    """
    residual = 0.0
    applicable = False
    for (k, idx), values in table.replica_groups().items():
        if idx.order < 2 or len(values) < 2:
            continue
        applicable = True
        scale = max(abs(v) for v in values)
        if scale <= tau_rel:
            continue
        spread = (max(values) - min(values)) / scale
        residual = max(residual, spread)
    return residual, applicable


def sign_first_moment(table, tau_rel=DEFAULT_TAU_REL):
    """Sign of the first moment of the first coefficient, read from the own
    first derivative of good 1 (positive diagonal curvature)."""
    v = table.value(1, ((1, 1),))
    if abs(v) <= tau_rel:
        return "indeterminate"
    return "+" if v > 0 else "-"


def complementarity_signs(v_derivs, tau_rel=DEFAULT_TAU_REL):
    """Sign matrix of the second value-function derivatives: nonnegative
    off-diagonals mark local complements, negative ones substitutes."""
    n = max(max(g) for g in v_derivs.entries) if v_derivs.entries else 0
    signs = [[0] * n for _ in range(n)]
    for j in range(1, n + 1):
        for k in range(1, n + 1):
            key = tuple(sorted((j, k)))
            if key in v_derivs:
                v = v_derivs[key]
                signs[j - 1][k - 1] = 0 if abs(v) <= tau_rel else (1 if v > 0 else -1)
    return signs


def build_report(table, v_derivs=None, relevance=None, tau_rel=DEFAULT_TAU_REL):
    """Assemble the full report from a table and optional recovery output."""
    try:
        cs = cauchy_schwarz_check(table, tau_rel)
    except (ConfigurationError, RelevanceError, KeyError):
        cs = None
    residual, applicable = symmetry_check(table, tau_rel)
    return DiagnosticsReport(
        cauchy_schwarz_stat=cs,
        symmetry_residual=residual,
        symmetry_applicable=applicable,
        relevance_map=dict(relevance or {}),
        sign_beta11=sign_first_moment(table, tau_rel),
        complementarity_signs=complementarity_signs(v_derivs, tau_rel) if v_derivs else None,
    )
