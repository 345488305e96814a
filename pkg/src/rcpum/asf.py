"""Mean demand evaluation: the per-coefficient mean choice and the average
structural function with all heterogeneity integrated out.

Exact strategies only are used on the identification path: closed forms for
logit-style models (including Gumbel-smoothed bundle models) and full
enumeration for finite disturbance supports.  A seeded Monte-Carlo fallback
over disturbance scenarios exists behind the same interface but nothing in
the acceptance path consumes randomness.
"""

from __future__ import annotations

import hashlib
import threading

import numpy as np

from . import logit
from .exceptions import ConfigurationError, InfeasibleScenarioError
from .models import (
    EXCLUDED,
    BundleModel,
    LogitModel,
    TabulatedModel,
    scenario_weights,
    solve_choice,
)


def _softmax_bundle_demand(model, idx, scenario):
    """Closed-form mean bundle under Gumbel smoothing of one scenario."""
    table = model.scenario_table(scenario)
    bundles = []
    utilities = []
    for y, d in sorted(table.items()):
        if d is EXCLUDED:
            continue
        bundles.append(y)
        utilities.append((float(np.dot(y, idx)) + d) / model.smoothing)
    if not bundles:
        raise InfeasibleScenarioError(f"scenario {scenario} excludes every bundle")
    z = np.asarray(utilities)
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return p @ np.asarray(bundles)


def ybar_given_beta(model, x, beta):
    """Mean demand vector at fixed slope coefficients (disturbance integrated)."""
    if isinstance(model, LogitModel):
        idx = model.indices(x, beta)
        return logit.choice_probabilities(model.alphas, idx, model.outside_good)
    if isinstance(model, BundleModel) and model.smoothing is not None:
        idx = model.indices(x, beta)
        out = np.zeros(model.n_goods)
        for s, scen in enumerate(model.scenarios):
            out += scen.weight * _softmax_bundle_demand(model, idx, s)
        return out
    if isinstance(model, (BundleModel, TabulatedModel)):
        weights = scenario_weights(model)
        out = np.zeros(model.n_goods)
        for s, w in enumerate(weights):
            out += w * solve_choice(model, x, beta, s)
        return out
    raise ConfigurationError(f"no exact evaluation strategy for {type(model).__name__}")


class AsfEvaluator:
    """Average structural function of a model under a coefficient mixture.

    Evaluations are deterministic and cached; the cache is insert-only and
    guarded by a lock so concurrent readers see consistent values.
    """

    def __init__(self, model, beta_dist, strategy="exact", n_draws=0, seed=None):
        if tuple(beta_dist.dims) != model.dims:
            raise ConfigurationError("model and coefficient distribution disagree on dims")
        if strategy not in ("exact", "monte_carlo"):
            raise ConfigurationError(f"unknown strategy {strategy!r}")
        if strategy == "monte_carlo":
            if not isinstance(model, (BundleModel, TabulatedModel)):
                raise ConfigurationError("Monte-Carlo fallback needs a finite-scenario model")
            if seed is None:
                raise ConfigurationError("Monte-Carlo evaluation requires an explicit seed")
            if n_draws < 1:
                raise ConfigurationError("Monte-Carlo evaluation requires n_draws >= 1")
        self.model = model
        self.beta_dist = beta_dist
        self.strategy = strategy
        self.n_draws = n_draws
        self.seed = seed
        self._cache = {}
        self._lock = threading.Lock()

    @property
    def center(self):
        return self.model.center

    def ybar_given_beta(self, x, beta):
        if self.strategy == "monte_carlo":
            return self._monte_carlo_ybar(x, beta)
        return ybar_given_beta(self.model, x, beta)

    def _monte_carlo_ybar(self, x, beta):
        # Scenario draws are re-seeded per point (stable digest, not the
        # salted builtin hash) so results depend on neither evaluation order
        # nor the process.
        digest = hashlib.blake2s(
            np.asarray(x, dtype=float).tobytes() + np.asarray(beta, dtype=float).tobytes()
        ).digest()
        point_key = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng((self.seed, point_key))
        weights = np.asarray(scenario_weights(self.model))
        draws = rng.choice(len(weights), size=self.n_draws, p=weights)
        out = np.zeros(self.model.n_goods)
        for s in draws:
            out += solve_choice(self.model, x, beta, int(s))
        return out / self.n_draws

    def asf(self, x):
        """Average structural function: mean demand over the full mixture."""
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = np.zeros(self.model.n_goods)
        for w, beta in self.beta_dist.support():
            out += w * self.ybar_given_beta(x, beta)
        out.setflags(write=False)
        with self._lock:
            self._cache.setdefault(key, out)
        return out


def asf(evaluator, x):
    """Module-level alias matching the operation name."""
    return evaluator.asf(x)
