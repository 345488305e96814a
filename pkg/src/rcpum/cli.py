"""Declarative scenario runner.

Parses a JSON configuration naming a model, a coefficient distribution, a
finite-difference scheme, a recovery route, and optional welfare and
diagnostics requests; runs the pipeline; writes machine-readable CSV tables
plus a JSON summary.  Reports are byte-identical across runs with the same
config and seed; wall-clock metadata goes to a separate file.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, logit
from .asf import AsfEvaluator
from .diagnostics import build_report
from .distributions import DiscreteBeta, ProductBeta, UnivariateAtoms, true_moment
from .exceptions import (
    AnchorError,
    ConfigurationError,
    EvaluationError,
    InfeasibleScenarioError,
    PreconditionError,
    RelevanceError,
    WeightingError,
)
from .models import EXCLUDED, BundleModel, BundleScenario, LogitModel, TabulatedModel
from .numdiff import FdScheme, derivative_table
from .recovery import (
    DEFAULT_TAU_REL,
    RecoveryConfig,
    VDerivTable,
    chain_ratios,
    recover_moments_independence,
    recover_moments_scale,
    recover_moments_vknown,
    recover_v_derivatives,
)
from .welfare import TaylorVModel, average_indirect_utility, default_trust_radius, path_integral_v

_RUN_FAILURES = (
    RelevanceError,
    AnchorError,
    PreconditionError,
    WeightingError,
    InfeasibleScenarioError,
    EvaluationError,
)


def _expect_keys(block, where, required=(), optional=()):
    if not isinstance(block, dict):
        raise ConfigurationError(f"{where} must be an object")
    allowed = set(required) | set(optional)
    unknown = set(block) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = set(required) - set(block)
    if missing:
        raise ConfigurationError(f"missing keys in {where}: {sorted(missing)}")


_MODEL_KEYS = {
    "logit": ("alphas", "outside_good", "index_form"),
    "bundle": ("scenarios", "lattice", "smoothing"),
    "tabulated": ("weights", "tables"),
}


def _build_model(block):
    if not isinstance(block, dict) or "type" not in block:
        raise ConfigurationError("model must be an object with a 'type' key")
    kind = block["type"]
    if kind not in _MODEL_KEYS:
        raise ConfigurationError(f"unknown model type {kind!r}")
    _expect_keys(
        block,
        "model",
        required=("type", "dims"),
        optional=("center", "nonnegative_domain") + _MODEL_KEYS[kind],
    )
    dims = tuple(int(d) for d in block["dims"])
    common = dict(
        dims=dims,
        center=np.asarray(block["center"], dtype=float) if block.get("center") is not None else None,
        nonnegative_domain=bool(block.get("nonnegative_domain", False)),
    )
    if kind == "logit":
        return LogitModel(
            alphas=tuple(float(a) for a in block.get("alphas", (0.0,) * len(dims))),
            outside_good=bool(block.get("outside_good", False)),
            index_form=block.get("index_form", "linear"),
            **common,
        )
    if kind == "bundle":
        scens = []
        for s in block.get("scenarios", ()):
            _expect_keys(
                s,
                "model.scenarios[]",
                required=("weight", "intercepts"),
                optional=("complementarities", "consideration"),
            )
            consideration = s.get("consideration")
            scens.append(
                BundleScenario(
                    weight=float(s["weight"]),
                    intercepts=tuple(float(v) for v in s["intercepts"]),
                    complementarities=tuple(
                        (int(j), int(k), float(v)) for j, k, v in s.get("complementarities", ())
                    ),
                    consideration=None
                    if consideration is None
                    else frozenset(tuple(float(q) for q in y) for y in consideration),
                )
            )
        lattice = block.get("lattice")
        return BundleModel(
            scenarios=tuple(scens),
            lattice=None if lattice is None else tuple(tuple(float(q) for q in y) for y in lattice),
            smoothing=None if block.get("smoothing") is None else float(block["smoothing"]),
            **common,
        )
    tables = []
    for tab in block.get("tables", ()):
        tables.append(
            {
                tuple(json.loads(k) if isinstance(k, str) else k): (
                    EXCLUDED if v is None else float(v)
                )
                for k, v in tab.items()
            }
        )
    return TabulatedModel(
        weights=tuple(float(w) for w in block.get("weights", ())),
        tables=tuple(tables),
        **common,
    )


def _build_beta(block, dims):
    _expect_keys(
        block, "beta", required=("type",), optional=("points", "weights", "marginals")
    )
    kind = block["type"]
    if kind == "discrete":
        return DiscreteBeta(dims, block["points"], block["weights"])
    if kind == "product":
        marginals = tuple(
            UnivariateAtoms(tuple(m["values"]), tuple(m["weights"])) for m in block["marginals"]
        )
        return ProductBeta(dims, marginals)
    raise ConfigurationError(f"unknown beta distribution type {kind!r}")


def _build_scheme(block):
    if block is None:
        return FdScheme()
    _expect_keys(block, "fd", optional=("kind", "base_step", "richardson_levels"))
    return FdScheme(
        kind=block.get("kind", "central"),
        base_step=None if block.get("base_step") is None else float(block["base_step"]),
        richardson_levels=None
        if block.get("richardson_levels") is None
        else int(block["richardson_levels"]),
    )


@dataclass
class ScenarioConfig:
    """Validated configuration with the objects the pipeline consumes."""

    model: object
    beta: object
    scheme: FdScheme
    route: str
    max_order: int
    scales: dict
    abs_mean: float | None
    v_derivs: VDerivTable | None
    tau_rel: float
    welfare: dict | None
    diagnostics: dict
    seed: int
    asf_options: dict
    echo: dict


def parse_config(raw):
    """Validate a raw config dict; unknown keys are rejected."""
    _expect_keys(
        raw,
        "config",
        required=("model", "beta", "recovery"),
        optional=("fd", "welfare", "diagnostics", "seed", "asf"),
    )
    model = _build_model(raw["model"])
    beta = _build_beta(raw["beta"], model.dims)

    rec = raw["recovery"]
    _expect_keys(
        rec,
        "recovery",
        required=("route", "max_order"),
        optional=("scales", "abs_mean", "tau_rel", "v_derivs"),
    )
    route = rec["route"]
    if route not in ("scale", "independence", "vknown"):
        raise ConfigurationError(f"unknown recovery route {route!r}")
    max_order = int(rec["max_order"])
    if max_order < 1:
        raise ConfigurationError("recovery.max_order must be >= 1")
    scales = {int(k): float(v) for k, v in (rec.get("scales") or {}).items()}
    if route == "scale":
        for m in range(1, max_order + 1):
            if m not in scales:
                raise ConfigurationError(f"scale route needs recovery.scales[{m}]")
    abs_mean = None if rec.get("abs_mean") is None else float(rec["abs_mean"])
    if route == "independence" and (abs_mean is None or abs_mean <= 0):
        raise ConfigurationError("independence route needs a positive recovery.abs_mean")
    v_derivs = None
    if rec.get("v_derivs") is not None:
        v_derivs = VDerivTable(
            {tuple(int(g) for g in k.split(",")): float(v) for k, v in rec["v_derivs"].items()}
        )
    if route == "vknown" and v_derivs is None:
        if not isinstance(model, LogitModel) or model.index_form != "linear":
            raise ConfigurationError(
                "vknown route needs recovery.v_derivs unless the model is logit "
                "(whose value function is known in closed form)"
            )
        v_derivs = VDerivTable(
            logit.vderiv_entries(model.alphas, max_order + 1, model.outside_good)
        )
    tau_rel = float(rec.get("tau_rel", DEFAULT_TAU_REL))
    # surface invalid route/scale combinations as config errors up front
    RecoveryConfig(
        route=route,
        max_order=max_order,
        scales=scales or None,
        abs_mean=abs_mean,
        v_derivs=v_derivs,
        tau_rel=tau_rel,
    )

    welfare = raw.get("welfare")
    if welfare is not None:
        _expect_keys(
            welfare,
            "welfare",
            optional=("points", "weighting", "trust_radius", "path_segments"),
        )
    diagnostics = raw.get("diagnostics") or {}
    _expect_keys(diagnostics, "diagnostics", optional=("cauchy_schwarz", "symmetry"))

    asf_options = raw.get("asf") or {}
    _expect_keys(asf_options, "asf", optional=("strategy", "n_draws"))

    scheme = _build_scheme(raw.get("fd"))
    if model.nonnegative_domain and scheme.kind != "forward":
        raise ConfigurationError("nonnegative-orthant models require the forward scheme")

    return ScenarioConfig(
        model=model,
        beta=beta,
        scheme=scheme,
        route=route,
        max_order=max_order,
        scales=scales,
        abs_mean=abs_mean,
        v_derivs=v_derivs,
        tau_rel=tau_rel,
        welfare=welfare,
        diagnostics={"cauchy_schwarz": bool(diagnostics.get("cauchy_schwarz", True)),
                     "symmetry": bool(diagnostics.get("symmetry", True))},
        seed=int(raw.get("seed", 0)),
        asf_options={"strategy": asf_options.get("strategy", "exact"),
                     "n_draws": int(asf_options.get("n_draws", 0))},
        echo=raw,
    )


def _fmt(x):
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _moment_rows(table, beta):
    rows = []
    for idx, rec in table.items():
        tru = true_moment(beta, idx)
        abs_err = abs(rec - tru)
        rel_err = abs_err / abs(tru) if tru != 0 else float("inf")
        rows.append((str(idx), _fmt(rec), _fmt(tru), _fmt(abs_err), _fmt(rel_err), table.route))
    return rows


def _recover(config, table):
    """Run the configured route, tolerating per-order failures.

    Returns (tables keyed by order, failure record or None); lower-order
    results are kept when recovery aborts at some order.
    """
    tables = {}
    failure = None
    if config.route == "independence":
        order = config.max_order
        while order >= 1:
            try:
                tables = recover_moments_independence(table, order, config.abs_mean, config.tau_rel)
                break
            except _RUN_FAILURES as exc:
                failure = _failure_record("recovery", exc)
                order = (getattr(exc, "order", None) or 1) - 1
        return tables, failure

    if config.route == "vknown":
        for order in range(1, config.max_order + 1):
            try:
                tables[order] = recover_moments_vknown(
                    table, config.v_derivs, order, config.tau_rel
                )
            except _RUN_FAILURES as exc:
                failure = _failure_record(f"recovery order {order}", exc)
                break
        return tables, failure

    for order in range(1, config.max_order + 1):
        try:
            tables[order] = recover_moments_scale(
                table, order, config.scales[order], config.tau_rel
            )
        except _RUN_FAILURES as exc:
            failure = _failure_record(f"recovery order {order}", exc)
            break
    return tables, failure


def _failure_record(stage, exc):
    return {"stage": stage, "error": type(exc).__name__, "message": str(exc)}


def run(config_path, out_dir, seed=None, max_order=None, scheme=None, route=None):
    """Execute one scenario; returns the process exit code."""
    started = time.time()
    try:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if seed is not None:
        raw["seed"] = int(seed)
    if max_order is not None:
        raw.setdefault("recovery", {})["max_order"] = int(max_order)
    if scheme is not None:
        raw.setdefault("fd", {})["kind"] = scheme
    if route is not None:
        raw.setdefault("recovery", {})["route"] = route

    try:
        config = parse_config(raw)
    except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    evaluator = AsfEvaluator(
        config.model,
        config.beta,
        strategy=config.asf_options["strategy"],
        n_draws=config.asf_options["n_draws"],
        seed=config.seed,
    )

    failure = None
    moment_tables = {}
    v_table = None
    welfare_out = None
    table = None
    try:
        table = derivative_table(evaluator, config.max_order, config.scheme)
    except _RUN_FAILURES as exc:
        failure = _failure_record("derivative_table", exc)

    if table is not None:
        moment_tables, failure = _recover(config, table)

    all_moments = {}
    for mt in moment_tables.values():
        all_moments.update(dict(mt.items()))
    if table is not None and all_moments:
        try:
            v_table = recover_v_derivatives(table, all_moments, config.tau_rel)
        except _RUN_FAILURES as exc:
            failure = failure or _failure_record("v_derivatives", exc)

    if config.welfare is not None and v_table is not None and failure is None:
        try:
            welfare_out = _run_welfare(config, evaluator, v_table)
        except _RUN_FAILURES + (ConfigurationError,) as exc:
            failure = _failure_record("welfare", exc)

    report = None
    if table is not None:
        relevance = {}
        for order in range(1, config.max_order + 1):
            try:
                relevance.update(chain_ratios(table, order, config.tau_rel).relevance)
            except _RUN_FAILURES:
                pass
        report = build_report(
            table,
            v_derivs=v_table,
            relevance=relevance,
            tau_rel=config.tau_rel,
        )

    _write_reports(out, config, evaluator, moment_tables, v_table, welfare_out, report, failure)
    meta = {
        "started_unix": started,
        "elapsed_seconds": time.time() - started,
    }
    (out / "run_meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
    return 2 if failure is not None else 0


def _run_welfare(config, evaluator, v_table):
    block = config.welfare
    model = config.model
    orders = sorted({len(g) for g in v_table.entries})
    tables = {
        o: VDerivTable({g: v for g, v in v_table.items() if len(g) == o}) for o in orders
    }
    points = [np.asarray(p, dtype=float) for p in block.get("points", [])]
    radius = block.get("trust_radius")
    if radius is None:
        radius = max(
            (default_trust_radius(model, config.beta, x) for x in points),
            default=1.0,
        )
    vmodel = TaylorVModel(
        gradient=evaluator.asf(model.center),
        tables=tables,
        trust_radius=float(radius),
    )
    weighting = block.get("weighting", "unweighted")
    out = {"weighting": weighting, "points": [], "path_integrals": []}
    for x in points:
        # extrapolation warnings are advisory; the trust radius is echoed
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val = average_indirect_utility(vmodel, model, config.beta, x, weighting)
        out["points"].append({"x": [float(v) for v in x], "value": float(val)})
    for seg in block.get("path_segments", []):
        xi = np.asarray(seg[0], dtype=float)
        xf = np.asarray(seg[1], dtype=float)
        out["path_integrals"].append(
            {
                "x_init": [float(v) for v in xi],
                "x_final": [float(v) for v in xf],
                "value": path_integral_v(evaluator, xi, xf),
            }
        )
    return out


def _write_reports(out, config, evaluator, moment_tables, v_table, welfare_out, report, failure):
    for order, mt in sorted(moment_tables.items()):
        _write_csv(
            out / f"moments_order{order}.csv",
            ("index", "recovered", "true", "abs_err", "rel_err", "route"),
            _moment_rows(mt, config.beta),
        )
    if v_table is not None:
        rows = [
            (",".join(map(str, gamma)), _fmt(v), _fmt(v_table.discrepancies.get(gamma, 0.0)))
            for gamma, v in v_table.items()
        ]
        _write_csv(out / "v_derivs.csv", ("index", "value", "split_spread"), rows)
    if report is not None:
        _write_csv(out / "diagnostics.csv", ("statistic", "value"), report.as_rows())

    summary = {
        "version": __version__,
        "config": config.echo,
        "failure": failure,
        "results": {
            "asf_center": [float(v) for v in evaluator.asf(config.model.center)],
            "moments": {
                str(order): {
                    "route": mt.route,
                    "entries": {str(i): float(v) for i, v in mt.items()},
                    "true": {str(i): float(true_moment(config.beta, i)) for i, _ in mt.items()},
                }
                for order, mt in sorted(moment_tables.items())
            },
            "v_derivatives": {
                ",".join(map(str, g)): float(v) for g, v in (v_table.items() if v_table else [])
            },
            "welfare": welfare_out,
            "diagnostics": None
            if report is None
            else {
                "cauchy_schwarz_stat": None
                if report.cauchy_schwarz_stat is None
                else float(report.cauchy_schwarz_stat),
                "symmetry_residual": float(report.symmetry_residual),
                "symmetry_applicable": report.symmetry_applicable,
                "sign_beta11": report.sign_beta11,
                "complementarity_signs": report.complementarity_signs,
            },
        },
    }
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def resolve_config_path(name):
    """Accept a filesystem path or the bare name of a bundled scenario."""
    p = Path(name)
    if p.exists():
        return p
    if "/" not in str(name) and not str(name).endswith(".json"):
        candidate = resources.files("rcpum") / "configs" / f"{name}.json"
        if candidate.is_file():
            return candidate
    return p


def main(argv=None):
    parser = argparse.ArgumentParser(prog="rcpum", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one scenario config")
    runp.add_argument("--config", required=True, help="config path or bundled scenario name")
    runp.add_argument("--out", required=True, help="output directory")
    runp.add_argument("--seed", type=int, default=None)
    runp.add_argument("--max-order", type=int, default=None)
    runp.add_argument("--scheme", choices=("central", "forward"), default=None)
    runp.add_argument("--route", choices=("scale", "independence", "vknown"), default=None)
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(
            resolve_config_path(args.config),
            args.out,
            seed=args.seed,
            max_order=args.max_order,
            scheme=args.scheme,
            route=args.route,
        )
    parser.error(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
