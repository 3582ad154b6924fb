"""The transfer pipeline: source fit, auxiliary construction, composition.

Given source data, target data, and a transformation G:

    1. fit f_so_hat on the source sample,
    2. relabel the target sample with auxiliary labels
       W_i = H(f_so_hat(X_i), Y_i),
    3. fit w_hat on the relabeled sample,
    4. predict G(f_so_hat(x), w_hat(x)).

With the non-transfer G this reduces bit-for-bit to fitting the target
stage directly on the target sample. Selection over a finite roster of
candidate transformations fits the source stage once, shares it, and keeps
the candidate with the lowest validation MSE.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, Union

import numpy as np

from .data import Dataset, DomainTag
from .ridge import RKHSKernel, KRRPredictor, krr_fit, krr_lambda_rule
from .smoothing import KSPredictor, SmoothingKernel, ks_bandwidth_rule, ks_fit
from .transform import (
    AuxiliaryEstimator,
    EstimatorMode,
    QuantizedFamily,
    TransformationFunction,
    apply_H,
    eval_G,
)


class Predictor(Protocol):
    def predict(self, X) -> np.ndarray: ...


@dataclass(frozen=True)
class BandwidthRule:
    """h = c * n^(-1/(2*alpha + d)), resolved against the training sample."""

    alpha: float = 1.0
    c: float = 1.0


@dataclass(frozen=True)
class LambdaRule:
    """lambda = c * n^(-1/(beta + p)), resolved against the training sample."""

    beta: float = 1.0
    p: float = 0.5
    c: float = 1.0


@dataclass(frozen=True)
class KSSpec:
    """Kernel smoothing subroutine: fixed bandwidth xor a bandwidth rule."""

    kernel: SmoothingKernel = SmoothingKernel.TRUNCATED_GAUSSIAN
    bandwidth: float | None = None
    rule: BandwidthRule | None = None

    def __post_init__(self):
        if (self.bandwidth is None) == (self.rule is None):
            raise ValueError("exactly one of bandwidth or rule must be given")

    def resolve_bandwidth(self, train: Dataset) -> float:
        if self.bandwidth is not None:
            return self.bandwidth
        return ks_bandwidth_rule(train.n, train.dim, self.rule.alpha, self.rule.c)

    def fit(self, train: Dataset) -> KSPredictor:
        return ks_fit(train, self.kernel, self.resolve_bandwidth(train))


@dataclass(frozen=True)
class KRRSpec:
    """Kernel ridge subroutine: fixed lambda xor a lambda rule."""

    kernel: RKHSKernel
    lam: float | None = None
    rule: LambdaRule | None = None

    def __post_init__(self):
        if (self.lam is None) == (self.rule is None):
            raise ValueError("exactly one of lam or rule must be given")

    def resolve_lambda(self, train: Dataset) -> float:
        if self.lam is not None:
            return self.lam
        return krr_lambda_rule(train.n, self.rule.beta, self.rule.p, self.rule.c)

    def fit(self, train: Dataset) -> KRRPredictor:
        return krr_fit(train, self.kernel, self.resolve_lambda(train))


SubroutineSpec = Union[KSSpec, KRRSpec]


@dataclass(frozen=True)
class HTLPredictor:
    """Composition G(f_so_hat(x), w_hat(x)) of the two fitted stages."""

    f_so_hat: Predictor
    w_hat: Predictor
    transformation: TransformationFunction

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return eval_G(
            self.transformation, self.f_so_hat.predict(X), self.w_hat.predict(X)
        )

    def predict_one(self, x) -> float:
        return float(self.predict(np.atleast_2d(np.asarray(x, dtype=float)))[0])


def construct_auxiliary(
    target: Dataset, f_so_hat: Predictor, est: AuxiliaryEstimator
) -> tuple[Dataset, int]:
    """Relabel the target sample with auxiliary labels.

    Features are unchanged; label i becomes H(f_so_hat(X_i), Y_i), clamped
    to +-aux_bound_B. Returns the relabeled dataset and the count of
    clamped rows. A singular inverse raises with the offending row index.
    """
    if target.domain_tag is not DomainTag.TARGET:
        raise ValueError(f"expected target-domain data, got {target.domain_tag}")
    a_hat = np.asarray(f_so_hat.predict(target.features), dtype=float)
    bound = est.transformation.aux_bound_B
    n_clipped = 0
    try:
        labels = np.asarray(apply_H(est, a_hat, target.labels), dtype=float)
    except ValueError as exc:
        # rerun row by row to name the offending row
        for i in range(target.n):
            try:
                apply_H(est, a_hat[i], target.labels[i])
            except ValueError:
                raise type(exc)(f"row {i}: {exc}") from exc
        raise
    if np.isfinite(bound):
        clipped = np.clip(labels, -bound, bound)
        n_clipped = int(np.sum(clipped != labels))
        labels = clipped
    y_bound = bound if np.isfinite(bound) else float(np.abs(labels).max())
    aux = Dataset(
        features=target.features,
        labels=labels,
        domain_tag=DomainTag.TARGET,
        x_bound=target.x_bound,
        y_bound=y_bound,
    )
    return aux, n_clipped


def htl_fit(
    source: Dataset | None,
    target: Dataset,
    tf: TransformationFunction,
    est: AuxiliaryEstimator,
    so_spec: SubroutineSpec,
    w_spec: SubroutineSpec,
    f_so_hat: Predictor | None = None,
) -> HTLPredictor:
    """Run the full transfer pipeline and return the composed predictor.

    ``tf`` is authoritative: if ``est`` was built for a different
    transformation it is rebound (and revalidated) against ``tf``. A prefit
    ``f_so_hat`` skips the source stage (used by selection to fit the
    source exactly once across candidates).
    """
    if est.transformation is not tf:
        est = AuxiliaryEstimator(
            transformation=tf,
            mode=est.mode,
            sigma2=est.sigma2,
            assume_noiseless=est.assume_noiseless,
        )
    if f_so_hat is None:
        if source is None:
            raise ValueError("either source data or a prefit f_so_hat is required")
        if source.domain_tag is not DomainTag.SOURCE:
            raise ValueError(f"expected source-domain data, got {source.domain_tag}")
        f_so_hat = so_spec.fit(source)
    aux, _ = construct_auxiliary(target, f_so_hat, est)
    w_hat = w_spec.fit(aux)
    return HTLPredictor(f_so_hat=f_so_hat, w_hat=w_hat, transformation=tf)


def htl_predict(p: HTLPredictor, x) -> float:
    return p.predict_one(x)


EstimatorFactory = Callable[[TransformationFunction], AuxiliaryEstimator]


def direct_estimator_factory(tf: TransformationFunction) -> AuxiliaryEstimator:
    return AuxiliaryEstimator(transformation=tf, mode=EstimatorMode.DIRECT_INVERSE)


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of validation-risk selection over candidate transformations."""

    chosen: TransformationFunction
    chosen_index: int
    per_candidate_validation_mse: tuple[tuple[str, float], ...]
    n_val: int


def select_transformation(
    source: Dataset,
    target: Dataset,
    validation: Dataset,
    family: QuantizedFamily | Sequence[TransformationFunction],
    so_spec: SubroutineSpec,
    w_spec: SubroutineSpec,
    est_factory: EstimatorFactory = direct_estimator_factory,
) -> SelectionResult:
    """Pick the candidate whose pipeline has the lowest validation MSE.

    The source stage is fit once and shared by every candidate (it does not
    depend on G). Ties go to the candidate closest to non-transfer
    (smallest |alpha|), then to the lowest index.
    """
    if validation.domain_tag is not DomainTag.VALIDATION:
        raise ValueError(
            f"expected validation-domain data, got {validation.domain_tag}"
        )
    if validation.n < 1:
        raise ValueError("validation set is empty")
    candidates = list(family.members if isinstance(family, QuantizedFamily) else family)
    if not candidates:
        raise ValueError("no candidate transformations")
    if source.domain_tag is not DomainTag.SOURCE:
        raise ValueError(f"expected source-domain data, got {source.domain_tag}")
    f_so_hat = so_spec.fit(source)

    rows: list[tuple[str, float]] = []
    for tf in candidates:
        predictor = htl_fit(
            source=None,
            target=target,
            tf=tf,
            est=est_factory(tf),
            so_spec=so_spec,
            w_spec=w_spec,
            f_so_hat=f_so_hat,
        )
        residuals = validation.labels - predictor.predict(validation.features)
        rows.append((tf.label, float(np.mean(residuals**2))))

    best = min(
        range(len(candidates)),
        key=lambda i: (rows[i][1], candidates[i].tie_break_key, i),
    )
    return SelectionResult(
        chosen=candidates[best],
        chosen_index=best,
        per_candidate_validation_mse=tuple(rows),
        n_val=validation.n,
    )
