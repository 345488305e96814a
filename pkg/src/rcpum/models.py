"""Latent utility model specifications and the per-scenario choice solver.

A model fixes the goods, their characteristic counts, a centering covariate
point, and a disturbance family.  Utility of a quantity vector y is

    sum_k y_k * (beta_k' (x_k - c_k)) + D(y, eps)

so the slope indices vanish exactly at the centering point c, which is where
all identification formulas are evaluated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .distributions import flat_offsets
from .exceptions import ConfigurationError, InfeasibleScenarioError


class _Excluded:
    """Marker for D = -infinity (bundle not considered)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EXCLUDED"


EXCLUDED = _Excluded()


def _as_center(center, total_dim):
    if center is None:
        c = np.zeros(total_dim)
    else:
        c = np.asarray(center, dtype=float)
    if c.shape != (total_dim,):
        raise ConfigurationError(f"center has shape {c.shape}, expected ({total_dim},)")
    c.setflags(write=False)
    return c


@dataclass(frozen=True)
class ModelSpec:
    """Common fields of every model variant."""

    dims: tuple[int, ...]
    center: np.ndarray = None
    nonnegative_domain: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ConfigurationError("dims must list at least one characteristic per good")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "center", _as_center(self.center, sum(dims)))

    @property
    def n_goods(self):
        return len(self.dims)

    @property
    def total_dim(self):
        return sum(self.dims)

    def indices(self, x, beta):
        """Utility index of each good: beta_k' (x_k - c_k)."""
        x = np.asarray(x, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if x.shape != (self.total_dim,) or beta.shape != (self.total_dim,):
            raise ConfigurationError(
                f"covariate/coefficient vectors must have length {self.total_dim}"
            )
        shifted = (x - self.center) * beta
        offs = flat_offsets(self.dims)
        return np.array([shifted[offs[k] : offs[k + 1]].sum() for k in range(self.n_goods)])


@dataclass(frozen=True)
class LogitModel(ModelSpec):
    """Multinomial logit with nonrandom intercepts and closed-form demand.

    With ``index_form="power"`` the utility index of good k is x_k ** rho_k
    for a scalar shifter (d_k must be 1), the random exponent playing the
    role of the slope coefficient; the centering point must be all-ones.
    """

    alphas: tuple[float, ...] = None
    outside_good: bool = False
    index_form: str = "linear"

    def __post_init__(self):
        super().__post_init__()
        alphas = self.alphas if self.alphas is not None else (0.0,) * self.n_goods
        alphas = tuple(float(a) for a in alphas)
        if len(alphas) != self.n_goods:
            raise ConfigurationError("one intercept per good required")
        object.__setattr__(self, "alphas", alphas)
        if self.index_form not in ("linear", "power"):
            raise ConfigurationError(f"unknown index_form {self.index_form!r}")
        if self.index_form == "power":
            if any(d != 1 for d in self.dims):
                raise ConfigurationError("power indices require a single shifter per good")
            if not np.allclose(self.center, 1.0):
                raise ConfigurationError("power indices are centered at the all-ones point")

    def indices(self, x, beta):
        if self.index_form == "power":
            x = np.asarray(x, dtype=float)
            beta = np.asarray(beta, dtype=float)
            if np.any(x <= 0):
                raise ConfigurationError("power indices need strictly positive shifters")
            return x**beta
        return super().indices(x, beta)


@dataclass(frozen=True)
class BundleScenario:
    """One realization of the bundle disturbance.

    ``complementarities`` maps unordered good pairs (j, k), 1-based with
    j < k, to the utility boost or loss of holding both; ``consideration``
    restricts the bundles the agent evaluates (None means the full lattice).
    """

    weight: float
    intercepts: tuple[float, ...]
    complementarities: tuple[tuple[int, int, float], ...] = ()
    consideration: frozenset | None = None

    def __post_init__(self):
        object.__setattr__(self, "intercepts", tuple(float(v) for v in self.intercepts))
        comps = []
        for j, k, v in self.complementarities:
            if not j < k:
                raise ConfigurationError("complementarity pairs must satisfy j < k")
            comps.append((int(j), int(k), float(v)))
        object.__setattr__(self, "complementarities", tuple(comps))
        if self.consideration is not None:
            object.__setattr__(
                self, "consideration", frozenset(tuple(float(q) for q in y) for y in self.consideration)
            )

    def disturbance(self, y):
        """D(y, eps) for this scenario, or EXCLUDED."""
        if self.consideration is not None and tuple(y) not in self.consideration:
            return EXCLUDED
        d = sum(q * e for q, e in zip(y, self.intercepts))
        for j, k, v in self.complementarities:
            d += y[j - 1] * y[k - 1] * v
        return d


def _default_lattice(n_goods):
    return tuple(itertools.product((0.0, 1.0), repeat=n_goods))


@dataclass(frozen=True)
class BundleModel(ModelSpec):
    """Finite bundle choice with latent consideration sets (per Example-2
    style utilities: per-good intercepts plus pairwise complementarities).

    ``smoothing`` adds an i.i.d. Gumbel taste shock of the given scale to
    every considered bundle, which integrates to a closed-form softmax over
    the lattice and makes the mean demand real-analytic in covariates.  With
    ``smoothing=None`` the solver is the hard argmax with ties averaged.
    """

    scenarios: tuple[BundleScenario, ...] = ()
    lattice: tuple[tuple[float, ...], ...] = None
    smoothing: float | None = None

    def __post_init__(self):
        super().__post_init__()
        if not self.scenarios:
            raise ConfigurationError("at least one disturbance scenario required")
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        lattice = self.lattice if self.lattice is not None else _default_lattice(self.n_goods)
        lattice = tuple(tuple(float(q) for q in y) for y in lattice)
        if not lattice:
            raise ConfigurationError("bundle lattice must be nonempty")
        for y in lattice:
            if len(y) != self.n_goods:
                raise ConfigurationError("lattice vectors must have one quantity per good")
        object.__setattr__(self, "lattice", lattice)
        _check_scenarios(self.scenarios, self.n_goods, lattice)
        if self.smoothing is not None and self.smoothing <= 0:
            raise ConfigurationError("smoothing scale must be positive")

    def scenario_table(self, s):
        """Tabulated D(y, eps) over the lattice for scenario index s."""
        scen = self.scenarios[s]
        return {y: scen.disturbance(y) for y in self.lattice}


@dataclass(frozen=True)
class TabulatedModel(ModelSpec):
    """Fully tabulated disturbance over an arbitrary finite budget.

    ``tables`` holds, per scenario, a mapping from quantity vector to D(y,
    eps); entries may be EXCLUDED.  The budget is the union of table keys.
    """

    weights: tuple[float, ...] = ()
    tables: tuple[dict, ...] = ()

    def __post_init__(self):
        super().__post_init__()
        if not self.tables:
            raise ConfigurationError("at least one disturbance scenario required")
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError("scenario weights must be nonnegative and sum to 1")
        if len(w) != len(self.tables):
            raise ConfigurationError("one weight per scenario table required")
        budgets = set()
        tables = []
        for tab in self.tables:
            clean = {}
            for y, v in tab.items():
                key = tuple(float(q) for q in y)
                if len(key) != self.n_goods:
                    raise ConfigurationError("budget vectors must have one quantity per good")
                clean[key] = v if v is EXCLUDED else float(v)
            if all(v is EXCLUDED for v in clean.values()):
                raise ConfigurationError("a scenario must consider at least one bundle")
            budgets.update(clean)
            tables.append(clean)
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "tables", tuple(tables))
        object.__setattr__(self, "budget", tuple(sorted(budgets)))

    def scenario_table(self, s):
        tab = self.tables[s]
        return {y: tab.get(y, EXCLUDED) for y in self.budget}


def _check_scenarios(scenarios, n_goods, lattice):
    total = 0.0
    lattice_set = set(lattice)
    for scen in scenarios:
        if scen.weight < 0:
            raise ConfigurationError("scenario weights must be nonnegative")
        total += scen.weight
        if len(scen.intercepts) != n_goods:
            raise ConfigurationError("one intercept per good required in each scenario")
        for j, k, _ in scen.complementarities:
            if not (1 <= j <= n_goods and 1 <= k <= n_goods):
                raise ConfigurationError("complementarity pair outside the good range")
        if scen.consideration is not None:
            if not scen.consideration:
                raise ConfigurationError("consideration sets must be nonempty")
            if not scen.consideration <= lattice_set:
                raise ConfigurationError("consideration set must lie inside the bundle lattice")
    if abs(total - 1.0) > 1e-12:
        raise ConfigurationError(f"scenario weights sum to {total}, expected 1 within 1e-12")


def scenario_weights(model):
    if isinstance(model, BundleModel):
        return tuple(s.weight for s in model.scenarios)
    if isinstance(model, TabulatedModel):
        return model.weights
    raise ConfigurationError("model has no finite disturbance scenarios")


def _require_finite_scenarios(model):
    if not hasattr(model, "scenario_table"):
        raise ConfigurationError(
            f"{type(model).__name__} has no finite disturbance scenarios to enumerate"
        )


def latent_utility(model, y, x, beta, scenario):
    """Utility of quantity vector y under one disturbance scenario.

    Returns EXCLUDED when the scenario does not consider y.
    """
    _require_finite_scenarios(model)
    table = model.scenario_table(scenario)
    key = tuple(float(q) for q in y)
    if key not in table:
        raise ConfigurationError(f"{key} is not in the model budget")
    d = table[key]
    if d is EXCLUDED:
        return EXCLUDED
    idx = model.indices(x, beta)
    return float(np.dot(key, idx) + d)


def solve_choice(model, x, beta, scenario):
    """Maximizing quantity vector for one scenario, ties averaged uniformly.

    Averaging keeps the output inside the convex hull of the budget, which
    is the set the aggregated demand lives in.
    """
    _require_finite_scenarios(model)
    table = model.scenario_table(scenario)
    idx = model.indices(x, beta)
    best = None
    argmax = []
    for y, d in table.items():
        if d is EXCLUDED:
            continue
        u = float(np.dot(y, idx) + d)
        if best is None or u > best:
            best = u
            argmax = [y]
        elif u == best:
            argmax.append(y)
    if best is None:
        raise InfeasibleScenarioError(f"scenario {scenario} excludes every bundle")
    return np.mean(np.array(argmax, dtype=float), axis=0)
