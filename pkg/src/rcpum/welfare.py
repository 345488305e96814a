"""Value-function reconstruction away from the center, welfare aggregates,
and counterfactual demand distributions.

Two reconstruction routes: a multivariate Taylor polynomial assembled from
recovered derivative tables (valid inside a trust radius, flagged outside),
and a quadrature line integral of mean demand for models whose first
characteristic carries a unit coefficient.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import flat_offsets, flat_position
from .exceptions import ConfigurationError, ExtrapolationWarning, PreconditionError, WeightingError

PATH_NODES = 32
_UNIT_COEF_TOL = 1e-12


@dataclass(frozen=True)
class TaylorVModel:
    """Taylor polynomial of the value function around the center index point.

    ``gradient`` holds the first-order coefficients (mean demand at the
    center); ``tables`` maps derivative order (>= 2) to a VDerivTable.  The
    additive constant is fixed by V(center) = 0.  Construction probes axis
    and diagonal segments for numerical convexity.
    """

    gradient: np.ndarray
    tables: dict
    trust_radius: float = 1.0

    def __post_init__(self):
        g = np.asarray(self.gradient, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "tables", dict(self.tables))
        for order, tab in self.tables.items():
            for gamma, v in tab.items():
                if len(gamma) != order:
                    raise ConfigurationError(
                        f"table at order {order} holds a key of length {len(gamma)}"
                    )
                if not np.isfinite(v):
                    raise ConfigurationError(f"non-finite Taylor coefficient at {gamma}")
        self._check_convexity()

    @property
    def n_goods(self):
        return len(self.gradient)

    def _check_convexity(self, tol=1e-6):
        k = self.n_goods
        directions = [np.eye(k)[i] for i in range(k)]
        directions += [
            (np.eye(k)[i] + s * np.eye(k)[j]) / math.sqrt(2)
            for i in range(k)
            for j in range(i + 1, k)
            for s in (1.0, -1.0)
        ]
        r = self.trust_radius
        for d in directions:
            for t in np.linspace(-0.8 * r, 0.8 * r, 5):
                step = 0.1 * r
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ExtrapolationWarning)
                    second = (
                        self.value(d * (t + step)) - 2 * self.value(d * t) + self.value(d * (t - step))
                    ) / step**2
                if second < -tol:
                    raise ConfigurationError(
                        f"Taylor model is non-convex along {d} at t={t:.3f} (second diff {second:.2e})"
                    )

    def _warn_if_outside(self, u):
        if np.max(np.abs(u)) > self.trust_radius:
            warnings.warn(
                f"index point {np.round(u, 6).tolist()} lies outside the trust radius "
                f"{self.trust_radius}; extrapolated value",
                ExtrapolationWarning,
                stacklevel=3,
            )

    def value(self, u):
        """V(u) - V(center-index point), by the symmetric Taylor sum."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_goods,):
            raise ConfigurationError(f"index vector must have length {self.n_goods}")
        self._warn_if_outside(u)
        total = float(np.dot(self.gradient, u))
        for order in sorted(self.tables):
            for gamma, coef in self.tables[order].items():
                mult = _inverse_count_factorial(gamma)
                term = coef * mult
                for g in gamma:
                    term *= u[g - 1]
                total += term
        return total

    def gradient_at(self, u):
        """Gradient of the Taylor polynomial (mean demand at index u)."""
        u = np.asarray(u, dtype=float)
        self._warn_if_outside(u)
        out = self.gradient.astype(float).copy()
        for order in sorted(self.tables):
            for gamma, coef in self.tables[order].items():
                mult = _inverse_count_factorial(gamma)
                for g in set(gamma):
                    reduced = list(gamma)
                    reduced.remove(g)
                    term = coef * mult * gamma.count(g)
                    for r in reduced:
                        term *= u[r - 1]
                    out[g - 1] += term
        return out


def _inverse_count_factorial(gamma):
    """1 / prod(count!) over repeated entries: the multinomial Taylor weight."""
    mult = 1.0
    for g in set(gamma):
        mult /= math.factorial(gamma.count(g))
    return mult


def taylor_v(vmodel, u):
    """Operation alias: Taylor value difference at index vector u."""
    return vmodel.value(u)


def default_trust_radius(model, beta_dist, x, cap=1.0):
    """Half the largest index magnitude over the support at x, capped."""
    largest = 0.0
    for _, beta in beta_dist.support():
        largest = max(largest, float(np.max(np.abs(model.indices(x, beta)))))
    return min(cap, 0.5 * largest) if largest > 0 else cap


def _first_char_positions(dims):
    offs = flat_offsets(dims)
    return [offs[k] for k in range(len(dims))]


def _require_unit_first_coefficients(beta_dist):
    dims = beta_dist.dims
    for pos in _first_char_positions(dims):
        for _, beta in beta_dist.support():
            if abs(beta[pos] - 1.0) > _UNIT_COEF_TOL:
                raise PreconditionError(
                    "path-integral recovery needs a unit coefficient on the first "
                    f"characteristic of every good; found {beta[pos]} at position {pos}"
                )


def _require_first_char_only(dims, x, center, name):
    offs = flat_offsets(dims)
    for k, d in enumerate(dims):
        for c in range(1, d):
            pos = offs[k] + c
            if abs(x[pos] - center[pos]) > 0:
                raise PreconditionError(
                    f"{name} must match the center in all characteristics beyond the first"
                )


def path_integral_v(evaluator, x_init, x_final, n_nodes=PATH_NODES):
    """Difference of the value function along a covariate segment.

    Gauss-Legendre quadrature of the mean demand dotted with the segment
    direction, over the convex combination t * x_final + (1 - t) * x_init.
    Requires a unit coefficient on the first characteristic of each good and
    segment endpoints that move only those characteristics.  The segment is
    integrated in a canonical orientation so that swapping the endpoints
    negates the result exactly.
    """
    model = evaluator.model
    dims = model.dims
    x_init = np.asarray(x_init, dtype=float)
    x_final = np.asarray(x_final, dtype=float)
    if x_init.shape != (model.total_dim,) or x_final.shape != (model.total_dim,):
        raise ConfigurationError("segment endpoints must be full covariate vectors")
    _require_unit_first_coefficients(evaluator.beta_dist)
    _require_first_char_only(dims, x_init, model.center, "x_init")
    _require_first_char_only(dims, x_final, model.center, "x_final")

    sign = 1.0
    if tuple(x_final) < tuple(x_init):
        x_init, x_final = x_final, x_init
        sign = -1.0

    first = _first_char_positions(dims)
    delta = np.array([x_final[p] - x_init[p] for p in first])
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    terms = []
    for t, w in zip((nodes + 1.0) / 2.0, weights / 2.0):
        x = t * x_final + (1.0 - t) * x_init
        terms.append(w * float(np.dot(evaluator.asf(x), delta)))
    return sign * math.fsum(terms)


def average_indirect_utility(vmodel, model, beta_dist, x, weighting="unweighted"):
    """Average of individual value differences over the coefficient mixture.

    ``weighting="inverse_abs_beta11"`` divides each support point's value by
    the magnitude of its first coefficient, fixing the conversion rate of the
    first characteristic to one util.
    """
    if weighting not in ("unweighted", "inverse_abs_beta11"):
        raise ConfigurationError(f"unknown weighting {weighting!r}")
    pos11 = flat_position(model.dims, 1, 1)
    x = np.asarray(x, dtype=float)
    total = 0.0
    for w, beta in beta_dist.support():
        u = model.indices(x, beta)
        scale = 1.0
        if weighting == "inverse_abs_beta11":
            if abs(beta[pos11]) < _UNIT_COEF_TOL:
                raise WeightingError(
                    "inverse-magnitude weighting undefined: a support point has a zero "
                    "coefficient on the first characteristic of good 1"
                )
            scale = 1.0 / abs(beta[pos11])
        total += w * scale * vmodel.value(u)
    return total


def counterfactual_demand(source, model, beta_dist, x):
    """Distribution of per-coefficient mean demand at covariates x.

    ``source`` is either a TaylorVModel (its gradient is the demand) or an
    evaluator with ``ybar_given_beta``.  Returns (weight, demand) pairs, one
    per support point.
    """
    x = np.asarray(x, dtype=float)
    out = []
    for w, beta in beta_dist.support():
        if hasattr(source, "gradient_at"):
            demand = source.gradient_at(model.indices(x, beta))
        elif hasattr(source, "ybar_given_beta"):
            demand = source.ybar_given_beta(x, beta)
        else:
            raise ConfigurationError("source must expose gradient_at or ybar_given_beta")
        out.append((float(w), np.asarray(demand, dtype=float)))
    return out


def _merge_atoms(values, weights):
    agg = {}
    for v, w in zip(values, weights):
        agg[float(v)] = agg.get(float(v), 0.0) + float(w)
    vals = np.array(sorted(agg))
    wts = np.array([agg[v] for v in vals])
    return vals, wts


def quantile_match_vprime(w_atoms, w_weights, eta_atoms, eta_weights, grid_size=101):
    """Monotone map carrying the index distribution onto the demand
    distribution: the one-dimensional quantile rearrangement.

    Both inputs are finite scalar distributions; piecewise-linear CDFs built
    on the atoms proxy for absolute continuity.  Returns (grid, values) with
    values nondecreasing.
    """
    ev, ew = _merge_atoms(eta_atoms, eta_weights)
    wv, ww = _merge_atoms(w_atoms, w_weights)
    if len(ev) < 2:
        raise PreconditionError(
            "index distribution is degenerate (single atom); the rearrangement "
            "needs a non-degenerate coefficient distribution and a nonzero covariate"
        )
    ecdf = np.cumsum(ew)
    wcdf = np.cumsum(ww)
    grid = np.linspace(ev[0], ev[-1], grid_size)
    q = np.interp(grid, ev, ecdf)
    values = np.interp(q, wcdf, wv)
    return grid, values
