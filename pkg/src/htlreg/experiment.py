"""Config-driven experiment harness: parse, run, report.

Configs are JSON (schema in the README). A run regenerates data per seed,
fits every configured method, and writes three artifacts to the output
directory: ``report.json`` (full results), ``per_seed.csv`` (one row per
(method, seed[, n_ta])), and ``plot_series.csv`` (plot-ready curves).
Reports carry no timestamps, aggregate in deterministic (method, seed)
order, and serialize with sorted keys, so identical configs produce
byte-identical artifacts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from . import __version__
from .data import (
    Dataset,
    DomainTag,
    SyntheticSpec,
    doppler_offset_spec,
    doppler_scale_spec,
    generate_synthetic,
    load_csv,
    subsample,
)
from .evaluation import excess_risk_mc, metric_report
from .pipeline import (
    BandwidthRule,
    KRRSpec,
    KSSpec,
    LambdaRule,
    Predictor,
    SubroutineSpec,
    construct_auxiliary,
    htl_fit,
    select_transformation,
)
from .ridge import KernelShape, RKHSKernel, gram, median_heuristic
from .smoothing import SmoothingKernel
from .transform import (
    AuxiliaryEstimator,
    EstimatorMode,
    TransformationFunction,
    loglinear,
    non_transfer,
    offset,
    quantize_offset_family,
    scale,
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the bad key."""


EXPERIMENT_KINDS = (
    "synthetic_offset",
    "synthetic_scale",
    "csv_transfer",
    "rate_sweep",
    "selection",
)

BUILTIN_BASELINES = ("only_target", "only_source", "combined")

# Custom baselines (external algorithms) can be registered here by name:
# fit_fn(source, target_train, source_spec, target_spec) -> Predictor.
_BASELINE_REGISTRY: dict[str, Callable] = {}


def register_baseline(name: str, fit_fn: Callable) -> None:
    if name in BUILTIN_BASELINES:
        raise ValueError(f"{name!r} is a built-in baseline")
    _BASELINE_REGISTRY[name] = fit_fn


def child_seed(seed: int, stream: int) -> int:
    """Deterministic per-purpose substream seed for a user-facing seed."""
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, np.uint64)[0])


# substream ids
_SOURCE, _TARGET, _VALIDATION, _TEST, _CV_SOURCE, _CV_TARGET, _EXCESS = range(7)
_RATE_BASE = 100  # + index of n_ta in the sweep grid


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class MethodConfig:
    """One subroutine stage: a spec, or a grid of specs resolved by CV."""

    name: str
    spec: SubroutineSpec | None
    grid: tuple[SubroutineSpec, ...] = ()
    cv_folds: int = 10

    def resolve(self, train: Dataset, seed: int) -> SubroutineSpec:
        if self.spec is not None:
            return self.spec
        best, _ = grid_search_cv(train, list(self.grid), self.cv_folds, seed)
        return best


@dataclass(frozen=True)
class TransformConfig:
    transformation: TransformationFunction
    estimator_mode: EstimatorMode = EstimatorMode.DIRECT_INVERSE
    sigma2: float = 0.0
    assume_noiseless: bool = False

    def estimator(self) -> AuxiliaryEstimator:
        return AuxiliaryEstimator(
            transformation=self.transformation,
            mode=self.estimator_mode,
            sigma2=self.sigma2,
            assume_noiseless=self.assume_noiseless,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_kind: str
    data: dict
    n_so: int
    n_ta: int
    n_val: int
    n_test: int
    source_method: MethodConfig
    target_method: MethodConfig
    baselines: tuple[str, ...]
    transformations: tuple[TransformConfig, ...]
    selection_family: dict | None
    seeds: tuple[int, ...]
    output_dir: Path
    raw: dict = field(repr=False, default_factory=dict)


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"missing required key {where}.{key}")
    return cfg[key]


_KS_KERNELS = {k.value: k for k in SmoothingKernel}


def _parse_rkhs_kernel(raw, where: str) -> RKHSKernel:
    if isinstance(raw, str):
        raw = {"shape": raw}
    shape = raw.get("shape", "rbf")
    if shape == "rbf":
        return RKHSKernel(
            shape=KernelShape.RBF, lengthscale=raw.get("lengthscale")
        )
    if shape == "linear":
        return RKHSKernel(shape=KernelShape.LINEAR, lengthscale=None)
    if shape == "polynomial":
        return RKHSKernel(
            shape=KernelShape.POLYNOMIAL,
            lengthscale=None,
            degree=int(raw.get("degree", 2)),
            offset=float(raw.get("offset", 1.0)),
        )
    raise ConfigError(f"{where}.kernel: unknown shape {shape!r}")


def parse_method(raw: dict, where: str) -> MethodConfig:
    method = _require(raw, "method", where)
    cv_folds = int(raw.get("cv_folds", 10))
    if method == "ks":
        kernel = _KS_KERNELS.get(raw.get("kernel", "truncated_gaussian"))
        if kernel is None:
            raise ConfigError(f"{where}.kernel: unknown smoothing kernel "
                              f"{raw.get('kernel')!r}")
        choices = [k for k in ("bandwidth", "bandwidth_grid", "bandwidth_rule")
                   if k in raw]
        if len(choices) != 1:
            raise ConfigError(
                f"{where}: exactly one of bandwidth, bandwidth_grid, "
                f"bandwidth_rule required, got {choices or 'none'}"
            )
        if "bandwidth" in raw:
            return MethodConfig(where, KSSpec(kernel, bandwidth=float(raw["bandwidth"])))
        if "bandwidth_rule" in raw:
            r = raw["bandwidth_rule"]
            rule = BandwidthRule(alpha=float(r.get("alpha", 1.0)),
                                 c=float(r.get("c", 1.0)))
            return MethodConfig(where, KSSpec(kernel, rule=rule))
        grid = tuple(KSSpec(kernel, bandwidth=float(h)) for h in raw["bandwidth_grid"])
        if not grid:
            raise ConfigError(f"{where}.bandwidth_grid: empty grid")
        return MethodConfig(where, None, grid=grid, cv_folds=cv_folds)
    if method == "krr":
        kernel = _parse_rkhs_kernel(raw.get("kernel", "rbf"), where)
        choices = [k for k in ("lambda", "lambda_grid", "lambda_rule") if k in raw]
        if len(choices) != 1:
            raise ConfigError(
                f"{where}: exactly one of lambda, lambda_grid, lambda_rule "
                f"required, got {choices or 'none'}"
            )
        if "lambda" in raw:
            return MethodConfig(where, KRRSpec(kernel, lam=float(raw["lambda"])))
        if "lambda_rule" in raw:
            r = raw["lambda_rule"]
            rule = LambdaRule(beta=float(r.get("beta", 1.0)),
                              p=float(r.get("p", 0.5)), c=float(r.get("c", 1.0)))
            return MethodConfig(where, KRRSpec(kernel, rule=rule))
        grid = tuple(KRRSpec(kernel, lam=float(v)) for v in raw["lambda_grid"])
        if not grid:
            raise ConfigError(f"{where}.lambda_grid: empty grid")
        return MethodConfig(where, None, grid=grid, cv_folds=cv_folds)
    raise ConfigError(f"{where}.method: expected 'ks' or 'krr', got {method!r}")


def parse_transformation(raw: dict, where: str) -> TransformConfig:
    family = _require(raw, "family", where)
    kwargs = {}
    if "lipschitz_L" in raw:
        kwargs["lipschitz_L"] = float(raw["lipschitz_L"])
    if "aux_bound_B" in raw:
        kwargs["aux_bound_B"] = float(raw["aux_bound_B"])
    if family == "offset":
        tf = offset(float(_require(raw, "alpha", where)), **kwargs)
    elif family == "scale":
        tf = scale(float(_require(raw, "alpha", where)), **kwargs)
    elif family == "non_transfer":
        tf = non_transfer()
    elif family == "loglinear":
        tf = loglinear(float(_require(raw, "beta", where)), **kwargs)
    else:
        raise ConfigError(f"{where}.family: unknown family {family!r}")
    mode = raw.get("estimator_mode", "direct_inverse")
    try:
        mode = EstimatorMode(mode)
    except ValueError:
        raise ConfigError(f"{where}.estimator_mode: unknown mode {mode!r}") from None
    return TransformConfig(
        transformation=tf,
        estimator_mode=mode,
        sigma2=float(raw.get("sigma2", 0.0)),
        assume_noiseless=bool(raw.get("assume_noiseless", False)),
    )


def parse_config(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    kind = _require(raw, "experiment_kind", "config")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"config.experiment_kind: {kind!r} not one of {EXPERIMENT_KINDS}"
        )
    data = dict(_require(raw, "data", "config"))
    sizes = dict(raw.get("sizes", {}))
    n_so = int(sizes.get("n_so", 0))
    n_ta = int(sizes.get("n_ta", 0))
    n_val = int(sizes.get("n_val", 0))
    n_test = int(sizes.get("n_test", 1000))
    if kind != "csv_transfer":
        if n_so < 1:
            raise ConfigError("config.sizes.n_so must be positive")
        if n_ta < 1 and kind != "rate_sweep":
            raise ConfigError("config.sizes.n_ta must be positive")
    methods = dict(_require(raw, "methods", "config"))
    source_method = parse_method(
        dict(_require(methods, "source", "config.methods")), "config.methods.source"
    )
    target_method = parse_method(
        dict(_require(methods, "target", "config.methods")), "config.methods.target"
    )
    baselines = tuple(methods.get("baselines", ["only_target"]))
    for b in baselines:
        if b not in BUILTIN_BASELINES and b not in _BASELINE_REGISTRY:
            raise ConfigError(
                f"config.methods.baselines: unknown baseline {b!r} "
                f"(built-ins: {BUILTIN_BASELINES})"
            )
    transformations = tuple(
        parse_transformation(dict(t), f"config.transformations[{i}]")
        for i, t in enumerate(raw.get("transformations", []))
    )
    selection_family = raw.get("selection_family")
    if kind == "selection":
        if selection_family is None:
            raise ConfigError("config.selection_family required for selection runs")
        if n_val < 1:
            raise ConfigError("config.sizes.n_val must be positive for selection")
    seeds = tuple(int(s) for s in _require(raw, "seeds", "config"))
    if not seeds:
        raise ConfigError("config.seeds must be nonempty")
    output_dir = Path(raw.get("output_dir", "htlreg_out"))
    if base_dir is not None:
        for key in ("source_csv", "target_csv"):
            if key in data and not Path(data[key]).is_absolute():
                data[key] = str(base_dir / data[key])
        if not output_dir.is_absolute():
            output_dir = base_dir / output_dir
    if kind == "csv_transfer":
        for key in ("source_csv", "target_csv"):
            p = Path(_require(data, key, "config.data"))
            if not p.exists():
                raise ConfigError(f"config.data.{key}: no such file: {p}")
    return ExperimentConfig(
        experiment_kind=kind,
        data=data,
        n_so=n_so,
        n_ta=n_ta,
        n_val=n_val,
        n_test=n_test,
        source_method=source_method,
        target_method=target_method,
        baselines=baselines,
        transformations=transformations,
        selection_family=selection_family,
        seeds=seeds,
        output_dir=output_dir,
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}"
        ) from None
    return parse_config(raw, base_dir=path.parent)


# ---------------------------------------------------------------------------
# cross-validation grid search


def cv_folds_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """A seeded disjoint, exhaustive partition of range(n) into folds parts."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    rng = np.random.default_rng(seed)
    return np.array_split(rng.permutation(n), folds)


def grid_search_cv(
    data: Dataset,
    candidates: Sequence[SubroutineSpec],
    folds: int,
    seed: int,
) -> tuple[SubroutineSpec, list[float]]:
    """Pick the candidate with the lowest mean across-fold validation MSE.

    Ties go to the first candidate in declared order. Returns the winner
    and the per-candidate mean CV errors. When every candidate shares one
    kernel and varies only its scalar hyperparameter, per-fold distance or
    Gram matrices are computed once and reused.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate grid")
    parts = cv_folds_indices(data.n, folds, seed)
    scores = _grid_cv_fast(data, candidates, parts)
    if scores is None:
        scores = _grid_cv_generic(data, candidates, parts)
    best = int(np.argmin(scores))
    return candidates[best], [float(s) for s in scores]


def _grid_cv_generic(data, candidates, parts) -> np.ndarray:
    all_idx = np.arange(data.n)
    scores = np.zeros(len(candidates))
    for test_idx in parts:
        train_idx = np.setdiff1d(all_idx, test_idx)
        train = Dataset(
            features=data.features[train_idx],
            labels=data.labels[train_idx],
            domain_tag=data.domain_tag,
        )
        X_test = data.features[test_idx]
        y_test = data.labels[test_idx]
        for j, spec in enumerate(candidates):
            pred = spec.fit(train).predict(X_test)
            scores[j] += float(np.mean((y_test - pred) ** 2))
    return scores / len(parts)


def _grid_cv_fast(data, candidates, parts) -> np.ndarray | None:
    """Shared-kernel fast paths; None when the grid is heterogeneous."""
    if all(isinstance(c, KSSpec) and c.bandwidth is not None for c in candidates):
        kernels = {c.kernel for c in candidates}
        if len(kernels) == 1:
            return _grid_cv_ks(data, candidates, parts, kernels.pop())
    if all(isinstance(c, KRRSpec) and c.lam is not None for c in candidates):
        kernels = {c.kernel for c in candidates}
        if len(kernels) == 1:
            return _grid_cv_krr(data, candidates, parts, kernels.pop())
    return None


def _grid_cv_ks(data, candidates, parts, kernel) -> np.ndarray:
    all_idx = np.arange(data.n)
    scores = np.zeros(len(candidates))
    for test_idx in parts:
        train_idx = np.setdiff1d(all_idx, test_idx)
        sq = cdist(data.features[test_idx], data.features[train_idx],
                   metric="sqeuclidean")
        y_train = data.labels[train_idx]
        y_test = data.labels[test_idx]
        nearest = np.argmin(sq, axis=1)
        for j, spec in enumerate(candidates):
            raw = kernel.profile_sq(sq / (spec.bandwidth * spec.bandwidth))
            sums = raw.sum(axis=1)
            live = sums > 0.0
            preds = np.empty(len(test_idx))
            preds[live] = (raw[live] @ y_train) / sums[live]
            dead = ~live
            if dead.any():
                preds[dead] = y_train[nearest[dead]]
            scores[j] += float(np.mean((y_test - preds) ** 2))
    return scores / len(parts)


def _grid_cv_krr(data, candidates, parts, kernel) -> np.ndarray:
    all_idx = np.arange(data.n)
    scores = np.zeros(len(candidates))
    for test_idx in parts:
        train_idx = np.setdiff1d(all_idx, test_idx)
        X_train = data.features[train_idx]
        fold_kernel = kernel
        if kernel.shape is KernelShape.RBF and kernel.lengthscale is None:
            fold_kernel = replace(kernel, lengthscale=median_heuristic(X_train))
        K = gram(fold_kernel, X_train, X_train)
        G_test = gram(fold_kernel, data.features[test_idx], X_train)
        y_train = data.labels[train_idx]
        y_test = data.labels[test_idx]
        m = len(train_idx)
        for j, spec in enumerate(candidates):
            system = K + m * spec.lam * np.eye(m)
            try:
                coef = cho_solve(cho_factor(system, lower=True), y_train)
            except LinAlgError:
                coef = np.linalg.solve(
                    system + 1e-10 * np.trace(K) / m * np.eye(m), y_train
                )
            preds = G_test @ coef
            scores[j] += float(np.mean((y_test - preds) ** 2))
    return scores / len(parts)


# ---------------------------------------------------------------------------
# experiment execution


def _synthetic_spec(config: ExperimentConfig) -> SyntheticSpec:
    d = config.data
    noise = float(d.get("noise_variance", 0.01))
    kind = config.experiment_kind
    if kind in ("synthetic_offset", "rate_sweep"):
        return doppler_offset_spec(noise, slope=float(d.get("slope", 1.0)))
    if kind == "synthetic_scale":
        return doppler_scale_spec(noise, factor=float(d.get("factor", 5.0)))
    if kind == "selection":
        true_alpha = float(d.get("true_alpha", 1.0))
        base = doppler_offset_spec(noise)
        return SyntheticSpec(
            source_fn=base.source_fn,
            target_fn=lambda X: true_alpha * base.source_fn(X)
            + np.asarray(X)[:, 0],
            input_sampler=base.input_sampler,
            noise_variance_source=noise,
            noise_variance_target=noise,
        )
    raise ConfigError(f"no synthetic generator for kind {kind!r}")


@dataclass
class SeedData:
    source: Dataset
    target: Dataset
    test: Dataset
    validation: Dataset | None
    spec: SyntheticSpec | None


def _generate_seed_data(config: ExperimentConfig, seed: int, n_ta: int) -> SeedData:
    spec = _synthetic_spec(config)
    source = generate_synthetic(spec, config.n_so, DomainTag.SOURCE,
                                child_seed(seed, _SOURCE))
    target = generate_synthetic(spec, n_ta, DomainTag.TARGET,
                                child_seed(seed, _TARGET))
    test = generate_synthetic(spec, config.n_test, DomainTag.TARGET,
                              child_seed(seed, _TEST))
    validation = None
    if config.n_val > 0:
        validation = generate_synthetic(spec, config.n_val, DomainTag.VALIDATION,
                                        child_seed(seed, _VALIDATION))
    return SeedData(source=source, target=target, test=test,
                    validation=validation, spec=spec)


def _pooled(data: SeedData) -> Dataset:
    return Dataset(
        features=np.vstack([data.source.features, data.target.features]),
        labels=np.concatenate([data.source.labels, data.target.labels]),
        domain_tag=DomainTag.TARGET,
    )


def _fit_baseline(
    name: str,
    data: SeedData,
    config: ExperimentConfig,
    seed: int,
    so_spec: SubroutineSpec,
    ta_spec: SubroutineSpec,
) -> Predictor:
    if name == "only_target":
        return ta_spec.fit(data.target)
    if name == "only_source":
        return so_spec.fit(data.source)
    if name == "combined":
        pooled = _pooled(data)
        spec = config.target_method.resolve(pooled, child_seed(seed, _CV_TARGET))
        return spec.fit(pooled)
    return _BASELINE_REGISTRY[name](data.source, data.target, so_spec, ta_spec)


def _method_roster(config: ExperimentConfig) -> list[tuple[str, object]]:
    roster: list[tuple[str, object]] = [(b, b) for b in config.baselines]
    for tcfg in config.transformations:
        roster.append((f"htl_{tcfg.transformation.label}", tcfg))
    return roster


def _run_methods_for_seed(
    config: ExperimentConfig, seed: int, data: SeedData
) -> tuple[list[dict], list[dict], dict[str, Predictor]]:
    """Fit and score every configured method on one seed's data."""
    rows: list[dict] = []
    errors: list[dict] = []
    so_spec = config.source_method.resolve(data.source, child_seed(seed, _CV_SOURCE))
    ta_direct = config.target_method.resolve(data.target, child_seed(seed, _CV_TARGET))
    f_so_hat: Predictor | None = None

    predictors: dict[str, Predictor] = {}
    for name, item in _method_roster(config):
        try:
            if not isinstance(item, TransformConfig):
                predictors[name] = _fit_baseline(
                    name, data, config, seed, so_spec, ta_direct
                )
            else:
                if f_so_hat is None:
                    f_so_hat = so_spec.fit(data.source)
                est = item.estimator()
                aux, _ = construct_auxiliary(data.target, f_so_hat, est)
                w_spec = config.target_method.resolve(
                    aux, child_seed(seed, _CV_TARGET)
                )
                predictors[name] = htl_fit(
                    source=None,
                    target=data.target,
                    tf=item.transformation,
                    est=est,
                    so_spec=so_spec,
                    w_spec=w_spec,
                    f_so_hat=f_so_hat,
                )
        except Exception as exc:  # recorded, run continues
            errors.append({"method": name, "seed": seed, "error": str(exc)})
            continue

    for name, _ in _method_roster(config):
        if name not in predictors:
            continue
        pred = predictors[name]
        try:
            report = metric_report(pred, data.test)
            row = {
                "method": name,
                "seed": seed,
                "mse": report.mse,
                "r_squared": report.r_squared,
            }
            if data.spec is not None:
                row["excess_risk"] = excess_risk_mc(
                    pred,
                    data.spec.target_fn,
                    data.spec.input_sampler,
                    n_mc=2000,
                    seed=child_seed(seed, _EXCESS),
                )
            if not all(math.isfinite(v) for k, v in row.items()
                       if isinstance(v, float)):
                raise ValueError(f"non-finite metric in {row}")
            rows.append(row)
        except Exception as exc:
            errors.append({"method": name, "seed": seed, "error": str(exc)})
    return rows, errors, predictors


def _aggregate(rows: list[dict], keys: tuple[str, ...], value_fields) -> list[dict]:
    """Mean and sample standard deviation per key group, in first-seen order."""
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = tuple(row.get(k) for k in keys)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        member_rows = groups[key]
        agg = dict(zip(keys, key))
        agg["n_rows"] = len(member_rows)
        for field_name in value_fields:
            values = [r[field_name] for r in member_rows if field_name in r]
            if not values:
                continue
            arr = np.asarray(values, dtype=float)
            agg[f"mean_{field_name}"] = float(arr.mean())
            agg[f"std_{field_name}"] = (
                float(arr.std(ddof=1)) if len(arr) > 1 else None
            )
        out.append(agg)
    return out


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every configured (method, seed) cell and write the report artifacts.

    Returns the report dict; ``report["errors"]`` is nonempty when some
    method failed (the run itself continues).
    """
    kind = config.experiment_kind
    if kind in ("synthetic_offset", "synthetic_scale"):
        report = _run_synthetic(config)
    elif kind == "rate_sweep":
        report = _run_rate_sweep(config)
    elif kind == "selection":
        report = _run_selection(config)
    else:
        report = _run_csv_transfer(config)
    report["experiment_kind"] = kind
    report["toolkit_version"] = __version__
    report["config"] = config.raw
    _write_artifacts(config, report)
    return report


def _run_synthetic(config: ExperimentConfig) -> dict:
    rows: list[dict] = []
    errors: list[dict] = []
    plot_rows: list[dict] = []
    for i, seed in enumerate(config.seeds):
        data = _generate_seed_data(config, seed, config.n_ta)
        seed_rows, seed_errors, predictors = _run_methods_for_seed(
            config, seed, data
        )
        rows.extend(seed_rows)
        errors.extend(seed_errors)
        if i == 0:
            plot_rows = _prediction_series(data, predictors)
    agg = _aggregate(rows, ("method",), ("mse", "r_squared", "excess_risk"))
    return {"rows": rows, "aggregates": agg, "errors": errors,
            "plot_series": plot_rows}


def _prediction_series(data: SeedData, predictors: dict[str, Predictor]) -> list[dict]:
    """Per-method predictions on an x grid (first seed), for plotting."""
    if data.spec is None or data.source.dim != 1:
        return []
    grid = np.linspace(0.0, 1.0, 200).reshape(-1, 1)
    series = {"x": grid[:, 0], "truth": np.asarray(data.spec.target_fn(grid))}
    for name, pred in predictors.items():
        series[name] = np.asarray(pred.predict(grid))
    names = list(series)
    return [
        {name: float(series[name][i]) for name in names}
        for i in range(len(grid))
    ]


def _run_rate_sweep(config: ExperimentConfig) -> dict:
    n_grid = [int(v) for v in config.data.get("n_ta_grid", [])]
    if len(n_grid) < 3:
        raise ConfigError("config.data.n_ta_grid needs at least 3 sizes")
    rows: list[dict] = []
    errors: list[dict] = []
    for seed in config.seeds:
        spec = _synthetic_spec(config)
        source = generate_synthetic(spec, config.n_so, DomainTag.SOURCE,
                                    child_seed(seed, _SOURCE))
        so_spec = config.source_method.resolve(source, child_seed(seed, _CV_SOURCE))
        f_so_hat = so_spec.fit(source)
        eval_seed = child_seed(seed, _EXCESS)
        for k, n_ta in enumerate(n_grid):
            target = generate_synthetic(spec, n_ta, DomainTag.TARGET,
                                        child_seed(seed, _RATE_BASE + k))
            data = SeedData(source=source, target=target, test=target,
                            validation=None, spec=spec)
            ta_spec = config.target_method.resolve(
                target, child_seed(seed, _CV_TARGET)
            )
            for name, item in _method_roster(config):
                try:
                    if not isinstance(item, TransformConfig):
                        pred = _fit_baseline(name, data, config, seed,
                                             so_spec, ta_spec)
                    else:
                        est = item.estimator()
                        aux, _ = construct_auxiliary(target, f_so_hat, est)
                        w_spec = config.target_method.resolve(
                            aux, child_seed(seed, _CV_TARGET)
                        )
                        pred = htl_fit(
                            source=None, target=target,
                            tf=item.transformation, est=est,
                            so_spec=so_spec, w_spec=w_spec, f_so_hat=f_so_hat,
                        )
                    risk = excess_risk_mc(pred, spec.target_fn, spec.input_sampler,
                                          n_mc=2000, seed=eval_seed)
                    rows.append({"method": name, "n_ta": n_ta, "seed": seed,
                                 "excess_risk": risk})
                except Exception as exc:
                    errors.append({"method": name, "seed": seed, "n_ta": n_ta,
                                   "error": str(exc)})
    agg = _aggregate(rows, ("method", "n_ta"), ("excess_risk",))
    rate_fits = {}
    for name, _ in _method_roster(config):
        points = [(a["n_ta"], a.get("mean_excess_risk", 0.0))
                  for a in agg if a["method"] == name and a.get("mean_excess_risk")]
        if len(points) >= 3:
            from .evaluation import rate_slope

            fit = rate_slope(points)
            rate_fits[name] = {"slope": fit.slope, "intercept": fit.intercept,
                               "points": [[int(n), r] for n, r in fit.points]}
    return {"rows": rows, "aggregates": agg, "errors": errors,
            "rate_fits": rate_fits, "plot_series": [
                {"n_ta": a["n_ta"], "method": a["method"],
                 "mean_excess_risk": a.get("mean_excess_risk")}
                for a in agg
            ]}


def _run_selection(config: ExperimentConfig) -> dict:
    fam_cfg = config.selection_family
    family = quantize_offset_family(
        L_alpha=float(_require(fam_cfg, "L_alpha", "config.selection_family")),
        L_a=float(fam_cfg.get("L_a", 1.0)),
        K=int(_require(fam_cfg, "K", "config.selection_family")),
    )
    rows: list[dict] = []
    errors: list[dict] = []
    candidate_mses: dict[str, list[float]] = {m.label: [] for m in family.members}
    for seed in config.seeds:
        data = _generate_seed_data(config, seed, config.n_ta)
        try:
            so_spec = config.source_method.resolve(
                data.source, child_seed(seed, _CV_SOURCE)
            )
            ta_spec = config.target_method.resolve(
                data.target, child_seed(seed, _CV_TARGET)
            )
            result = select_transformation(
                source=data.source,
                target=data.target,
                validation=data.validation,
                family=family,
                so_spec=so_spec,
                w_spec=ta_spec,
            )
            row = {
                "seed": seed,
                "chosen": result.chosen.label,
                "chosen_alpha": result.chosen.alpha,
                "chosen_validation_mse": result.per_candidate_validation_mse[
                    result.chosen_index
                ][1],
            }
            rows.append(row)
            for label, value in result.per_candidate_validation_mse:
                candidate_mses[label].append(value)
        except Exception as exc:
            errors.append({"seed": seed, "error": str(exc)})
    plot = [
        {"candidate": label, "mean_validation_mse":
         float(np.mean(vals)) if vals else None}
        for label, vals in candidate_mses.items()
    ]
    chosen_counts: dict[str, int] = {}
    for row in rows:
        chosen_counts[row["chosen"]] = chosen_counts.get(row["chosen"], 0) + 1
    return {"rows": rows, "errors": errors, "plot_series": plot,
            "aggregates": [{"chosen": k, "count": v}
                           for k, v in sorted(chosen_counts.items())],
            "candidate_alphas": [float(a) for a in family.alphas]}


def _run_csv_transfer(config: ExperimentConfig) -> dict:
    source_full = load_csv(config.data["source_csv"],
                           config.data.get("label_column", "y"))
    source_full = Dataset(
        features=source_full.features, labels=source_full.labels,
        domain_tag=DomainTag.SOURCE,
        x_bound=source_full.x_bound, y_bound=source_full.y_bound,
    )
    target_full = load_csv(config.data["target_csv"],
                           config.data.get("label_column", "y"))
    n_ta_values = config.data.get("n_ta", config.n_ta)
    if isinstance(n_ta_values, (int, float)):
        n_ta_values = [int(n_ta_values)]
    n_ta_values = [int(v) for v in n_ta_values]
    if not n_ta_values or min(n_ta_values) < 1:
        raise ConfigError("config.data.n_ta must list positive target sizes")
    if max(n_ta_values) >= target_full.n:
        raise ConfigError(
            f"config.data.n_ta: largest size {max(n_ta_values)} leaves no "
            f"test rows out of {target_full.n}"
        )
    rows: list[dict] = []
    errors: list[dict] = []
    for seed in config.seeds:
        n_so = config.n_so if config.n_so >= 1 else source_full.n
        source = (subsample(source_full, min(n_so, source_full.n),
                            child_seed(seed, _SOURCE))
                  if n_so < source_full.n else source_full)
        perm = np.random.default_rng(child_seed(seed, _TARGET)).permutation(
            target_full.n
        )
        for k, n_ta in enumerate(n_ta_values):
            train_idx = perm[:n_ta]
            test_idx = perm[max(n_ta_values):]
            target = Dataset(features=target_full.features[train_idx],
                             labels=target_full.labels[train_idx],
                             domain_tag=DomainTag.TARGET)
            test = Dataset(features=target_full.features[test_idx],
                           labels=target_full.labels[test_idx],
                           domain_tag=DomainTag.TARGET)
            data = SeedData(source=source, target=target, test=test,
                            validation=None, spec=None)
            seed_rows, seed_errors, _ = _run_methods_for_seed(config, seed, data)
            for row in seed_rows:
                row["n_ta"] = n_ta
            for err in seed_errors:
                err["n_ta"] = n_ta
            rows.extend(seed_rows)
            errors.extend(seed_errors)
    agg = _aggregate(rows, ("method", "n_ta"), ("mse", "r_squared"))
    plot = [{"n_ta": a["n_ta"], "method": a["method"],
             "mean_mse": a.get("mean_mse")} for a in agg]
    return {"rows": rows, "aggregates": agg, "errors": errors,
            "plot_series": plot}


# ---------------------------------------------------------------------------
# artifacts


def _write_artifacts(config: ExperimentConfig, report: dict) -> None:
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8",
    )
    _write_csv(out / "per_seed.csv", report.get("rows", []))
    _write_csv(out / "plot_series.csv", report.get("plot_series", []))


def _write_csv(path: Path, rows: list[dict]) -> None:
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            fh.write("\n")
            return
        fields: list[str] = []
        for row in rows:
            for key in row:
                if key not in fields:
                    fields.append(key)
        writer = _csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value
