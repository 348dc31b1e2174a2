"""Martingale families with exactly checkable conditional moment structure.

Every family produces difference sequences whose conditional law given the
past is a symmetric two-point law (one scale per step) or a symmetric
three-point law {-c, 0, +c}.  That closure is what makes the whole toolkit
honest: conditional moments, moment generating functions, tilted transition
probabilities, and the multiplicative martingale Z are all available in
closed form, so the verification suite can hard-assert identities instead
of estimating them.

Families
--------
ScaledRademacher   deterministic step scales w_i with sum w_i^2 = 1.
VarianceSwitch     step variance (1 + delta^2 sign(S_{i-1}))/n, a minimal
                   predictable-variance model with |<S>_n - 1| <= delta^2.
SelfNormalized     independent symmetric steps with |xi_i| in [a, b]; paths
                   are emitted normalized by the realized root square
                   bracket, so the difference sequence sums to the
                   self-normalized statistic and <S>_n = 1.
RegressionModel    least-squares error reduction: covariates phi_k drawn
                   once (uniform on [a, b]), bounded symmetric noise; paths
                   are the normalized differences phi_k e_k/(sigma sqrt(sum
                   phi^2)), again with <S>_n = 1.

Randomness is counter-based: a Philox generator keyed by
``[seed, (stream << 56) | index]``.  Draw order inside one path is fixed
and documented per family (magnitudes or covariates first, then one
uniform per step for the sign/outcome).  A step goes up when its uniform
is below the tilted up-probability expit(2*lambda*scale); at lambda = 0
that threshold is exactly 0.5, so the tilted sampler reproduces the plain
sampler bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Union

import numpy as np
from scipy.special import expit

from .bounds import BernsteinParams
from .errors import ConfigError, DomainError, UnsupportedModelError

__all__ = [
    "NoiseFamily", "ScaledRademacher", "VarianceSwitch", "RegressionModel",
    "SelfNormalized", "MartingaleModel", "PathSample", "ConjugatePathStats",
    "A1Report", "LemmaReport", "simulate_path", "simulate_tilted_path",
    "conjugate_stats", "verify_A1", "verify_A2", "lemma_checks",
    "bolthausen_augment", "noise_bernstein_constant", "model_id",
    "model_to_dict", "model_from_dict", "model_to_json", "model_from_json",
    "path_to_csv", "generator_for",
    "STREAM_PATH", "STREAM_AUGMENT", "STREAM_MC", "STREAM_MC_TILTED",
]

_LOG2 = math.log(2.0)
_LOG8 = math.log(8.0)

# Stream constants partition the Philox key space so distinct uses of one
# seed never share counter blocks.
STREAM_PATH = 0
STREAM_AUGMENT = 1
STREAM_MC = 2
STREAM_MC_TILTED = 3

_MASK64 = (1 << 64) - 1
_INDEX_LIMIT = 1 << 56


def generator_for(seed: int, stream: int, index: int) -> np.random.Generator:
    """Philox generator for (seed, stream, index), the documented key layout."""
    if not 0 <= int(seed) <= _MASK64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not 0 <= int(stream) < 256:
        raise DomainError(f"stream out of range: {stream}")
    if not 0 <= int(index) < _INDEX_LIMIT:
        raise DomainError(f"index out of range: {index}")
    key = np.array([int(seed), (int(stream) << 56) | int(index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class NoiseFamily(str, Enum):
    """Regression noise laws with closed-form conditional moments."""

    RADEMACHER_SCALED = "rademacher_scaled"      # +-sigma, equal odds
    TRUNCATED_SYMMETRIC = "truncated_symmetric"  # {-2s, 0, +2s}, P(+-) = 1/8


def noise_bernstein_constant(noise: NoiseFamily, sigma: float,
                             max_order: int = 12) -> float:
    """Smallest eps2 with |E[e^l]| <= (l!/2) eps2^(l-2) sigma^2 up to max_order.

    Runs the even-moment recursion directly rather than hard-coding the
    answer; for both built-in laws the order-4 moment binds and the
    factorial growth dominates beyond, which the test suite pins down.
    """
    if sigma <= 0.0 or not math.isfinite(sigma):
        raise DomainError(f"sigma must be positive, got {sigma}")
    if max_order < 4:
        raise DomainError("max_order must be at least 4 to bind eps2")
    noise = NoiseFamily(noise)
    best = 0.0
    for order in range(4, max_order + 1, 2):
        moment = _noise_abs_moment_normalized(noise, order) * sigma ** order
        need = (moment / (0.5 * math.factorial(order) * sigma * sigma)) \
            ** (1.0 / (order - 2))
        best = max(best, need)
    return best


def _noise_abs_moment_normalized(noise: NoiseFamily, order: int) -> float:
    """|E[(e/sigma)^order]| for the unit-variance normalized noise."""
    if order % 2 == 1:
        return 0.0
    if noise is NoiseFamily.RADEMACHER_SCALED:
        return 1.0
    # {-2, 0, +2} with P(+-) = 1/8: E[t^order] = 2^order / 4
    return 2.0 ** order / 4.0


@dataclass(frozen=True)
class ScaledRademacher:
    """Independent fair signs on deterministic scales w_i, sum w_i^2 = 1."""

    weights: tuple

    kind = "scaled_rademacher"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DomainError("weights must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise DomainError("weights must be finite and positive")
        total = math.fsum(float(x) * float(x) for x in w)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(
                f"sum of squared weights must be 1 (got {total!r})")
        if float(w.max()) > 0.5:
            raise DomainError(
                "max weight exceeds 1/2; the Bernstein scale would leave (0, 1/2]")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @classmethod
    def equal_weights(cls, n: int) -> "ScaledRademacher":
        """The canonical 1/sqrt(n) model (requires n >= 4)."""
        if n < 4:
            raise DomainError("equal weights need n >= 4 so that w <= 1/2")
        return cls(weights=(1.0 / math.sqrt(n),) * n)

    @property
    def n(self) -> int:
        return len(self.weights)

    def bernstein_params(self) -> BernsteinParams:
        return BernsteinParams(max(self.weights), 0.0)


@dataclass(frozen=True)
class VarianceSwitch:
    """Two-point steps whose variance tracks the sign of the running sum.

    Step i has conditional variance (1 + delta^2 sign(S_{i-1}))/n with
    sign(0) = +1, so the terminal quadratic characteristic sits inside
    [1 - delta^2, 1 + delta^2] on every path.
    """

    n: int
    delta: float

    kind = "variance_switch"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not (0.0 <= self.delta <= 1.0) or not math.isfinite(self.delta):
            raise DomainError(f"delta must lie in [0, 1], got {self.delta!r}")

    def bernstein_params(self) -> BernsteinParams:
        eps = math.sqrt((1.0 + self.delta ** 2) / self.n)
        if eps > 0.5:
            raise DomainError(
                f"step scale {eps:.6g} exceeds 1/2; increase n (need "
                f"n >= {4.0 * (1.0 + self.delta ** 2):.6g})")
        return BernsteinParams(eps, self.delta)


@dataclass(frozen=True)
class SelfNormalized:
    """Independent symmetric steps with magnitudes uniform on [a, b].

    Paths are emitted after dividing by the realized root square bracket,
    so the differences are eta_i = xi_i / sqrt(sum xi_j^2): their running
    sum ends at the self-normalized statistic and their quadratic
    characteristic (signs conditioned on magnitudes) is exactly 1.
    """

    n: int
    magnitude_low: float
    magnitude_high: float

    kind = "self_normalized"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        a, b = self.magnitude_low, self.magnitude_high
        if not (0.0 < a <= b) or not math.isfinite(b):
            raise DomainError(
                f"magnitude band must satisfy 0 < a <= b, got [{a!r}, {b!r}]")

    def bernstein_params(self) -> BernsteinParams:
        eps = self.magnitude_high / (self.magnitude_low * math.sqrt(self.n))
        if eps > 0.5:
            raise DomainError(
                f"normalized step scale b/(a sqrt(n)) = {eps:.6g} exceeds 1/2; "
                "increase n")
        return BernsteinParams(eps, 0.0)


@dataclass(frozen=True)
class RegressionModel:
    """Linear model X_k = theta phi_k + e_k with bounded symmetric noise.

    Covariates are drawn once, uniform on [covariate_low, covariate_high],
    and belong to the time-zero information; paths are the normalized
    error-martingale differences phi_k e_k / (sigma sqrt(sum phi^2)), whose
    quadratic characteristic telescopes to exactly 1.
    """

    theta: float
    n: int
    covariate_low: float
    covariate_high: float
    sigma: float
    noise: NoiseFamily

    kind = "regression"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not math.isfinite(self.theta):
            raise DomainError("theta must be finite")
        a, b = self.covariate_low, self.covariate_high
        if not (0.0 < a <= b) or not math.isfinite(b):
            raise DomainError(
                f"covariate band must satisfy 0 < a <= b, got [{a!r}, {b!r}]")
        if self.sigma <= 0.0 or not math.isfinite(self.sigma):
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        object.__setattr__(self, "noise", NoiseFamily(self.noise))

    @property
    def eps1_worst(self) -> float:
        """Upper bound on max|phi_k|/sqrt(sum phi^2) over all designs."""
        return self.covariate_high / (self.covariate_low * math.sqrt(self.n))

    def bernstein_params(self) -> BernsteinParams:
        eps2 = noise_bernstein_constant(self.noise, self.sigma)
        eps = self.eps1_worst * eps2 / self.sigma
        if eps > 0.5:
            raise DomainError(
                f"declared scale eps1*eps2/sigma = {eps:.6g} exceeds 1/2; "
                "increase n")
        return BernsteinParams(eps, 0.0)


MartingaleModel = Union[ScaledRademacher, VarianceSwitch, RegressionModel,
                        SelfNormalized]

_MODEL_CLASSES = {cls.kind: cls for cls in
                  (ScaledRademacher, VarianceSwitch, RegressionModel,
                   SelfNormalized)}


def _require_model(model) -> None:
    if not isinstance(model, tuple(_MODEL_CLASSES.values())):
        raise UnsupportedModelError(
            f"not a built-in martingale family: {type(model).__name__}")


def model_to_dict(model: MartingaleModel) -> dict:
    _require_model(model)
    if isinstance(model, ScaledRademacher):
        return {"kind": model.kind, "weights": list(model.weights)}
    if isinstance(model, VarianceSwitch):
        return {"kind": model.kind, "n": model.n, "delta": model.delta}
    if isinstance(model, SelfNormalized):
        return {"kind": model.kind, "n": model.n,
                "magnitude_low": model.magnitude_low,
                "magnitude_high": model.magnitude_high}
    return {"kind": model.kind, "theta": model.theta, "n": model.n,
            "covariate_low": model.covariate_low,
            "covariate_high": model.covariate_high,
            "sigma": model.sigma, "noise": model.noise.value}


def model_from_dict(data: dict) -> MartingaleModel:
    try:
        kind = data["kind"]
    except (TypeError, KeyError):
        raise ConfigError("model document lacks a 'kind' field") from None
    try:
        cls = _MODEL_CLASSES[kind]
    except KeyError:
        raise ConfigError(f"unknown model kind {kind!r}") from None
    fields = {k: v for k, v in data.items() if k != "kind"}
    if cls is ScaledRademacher and "weights" in fields:
        fields["weights"] = tuple(fields["weights"])
    try:
        return cls(**fields)
    except TypeError as exc:
        raise ConfigError(f"bad fields for model kind {kind!r}: {exc}") from None


def model_to_json(model: MartingaleModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> MartingaleModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model document is not valid JSON: {exc}") from None
    return model_from_dict(data)


def model_id(model: MartingaleModel) -> str:
    """Stable identifier: kind plus a digest of the canonical JSON form."""
    blob = json.dumps(model_to_dict(model), sort_keys=True,
                      separators=(",", ":"))
    digest = hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
    return f"{model.kind}-{digest}"


@dataclass(frozen=True, eq=False)
class PathSample:
    """One realized path: differences, running sums, and both brackets.

    ``seed``/``path_index`` are the replay coordinates: feeding them back
    into the generating call reproduces the path bit for bit.
    """

    differences: np.ndarray   # xi_1..xi_n
    partial_sums: np.ndarray  # S_0..S_n
    qc: np.ndarray            # <S>_0..<S>_n
    sq_bracket: float         # [S]_n = sum xi_i^2 (exactly rounded)
    seed: int
    model_id: str
    path_index: int = 0

    def __post_init__(self):
        for name in ("differences", "partial_sums", "qc"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.differences.size
        if self.partial_sums.size != n + 1 or self.qc.size != n + 1:
            raise DomainError("partial_sums and qc must have length n + 1")

    @property
    def n(self) -> int:
        return self.differences.size

    @property
    def final(self) -> float:
        return float(self.partial_sums[-1])


@dataclass(frozen=True, eq=False)
class ConjugatePathStats:
    """Per-path objects of the exponential change of measure at tilt lam.

    ``per_step_psi`` holds the per-step log conditional MGF values, so
    prefix sums give every intermediate Psi_k; ``half_cosh_applicable``
    records whether the path came from a conditionally symmetric two-point
    family normalized to <S>_n = 1, the scope of the Psi_k <= lam^2/2
    comparison.
    """

    lam: float
    z: float
    log_z: float
    psi: float
    b_drift: float
    y: float
    per_step_b: np.ndarray
    per_step_psi: np.ndarray
    half_cosh_applicable: bool

    def __post_init__(self):
        for name in ("per_step_b", "per_step_psi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _uniform_band(rng: np.random.Generator, low: float, high: float,
                  n: int) -> np.ndarray:
    # low + (high-low)*u keeps the degenerate low == high case exact
    return low + (high - low) * rng.random(n)


def _signs_from_uniforms(u: np.ndarray, lam: float,
                         scales: np.ndarray) -> np.ndarray:
    """+1/-1 per step; up-probability expit(2*lam*scale) (1/2 at lam=0)."""
    return np.where(u < expit(2.0 * lam * scales), 1.0, -1.0)


def _variance_switch_walk(model: VarianceSwitch, rng: np.random.Generator,
                          lam: float):
    d2 = model.delta ** 2
    s_plus = math.sqrt((1.0 + d2) / model.n)
    s_minus = math.sqrt((1.0 - d2) / model.n)
    u = rng.random(model.n)
    p_plus = float(expit(2.0 * lam * s_plus))
    p_minus = float(expit(2.0 * lam * s_minus))
    xi = np.empty(model.n)
    var = np.empty(model.n)
    s = 0.0
    for i in range(model.n):
        if s >= 0.0:  # sign(0) = +1
            scale, p_up = s_plus, p_plus
        else:
            scale, p_up = s_minus, p_minus
        step = scale if u[i] < p_up else -scale
        xi[i] = step
        var[i] = scale * scale
        s += step
    return xi, np.cumsum(var)


def _three_point_outcomes(u: np.ndarray, lam: float,
                          support: np.ndarray) -> np.ndarray:
    """Outcome in {+1, 0, -1} units for {-c, 0, +c} steps, P(+-) = 1/8.

    Tilting scales the point masses by e^{+-lam c} on the extremes; the
    thresholds reduce to (1/8, 7/8) exactly at lam = 0.
    """
    t = lam * support
    up_w = 0.125 * np.exp(t)
    down_w = 0.125 * np.exp(-t)
    total = up_w + 0.75 + down_w
    hi = up_w / total
    mid = hi + 0.75 / total
    return np.where(u < hi, 1.0, np.where(u < mid, 0.0, -1.0))


def _generate(model: MartingaleModel, lam: float, seed: int,
              path_index: int) -> PathSample:
    rng = generator_for(seed, STREAM_PATH, path_index)
    if isinstance(model, ScaledRademacher):
        scales = np.asarray(model.weights)
        signs = _signs_from_uniforms(rng.random(scales.size), lam, scales)
        xi = scales * signs
        qc_tail = np.cumsum(scales * scales)
    elif isinstance(model, VarianceSwitch):
        xi, qc_tail = _variance_switch_walk(model, rng, lam)
    elif isinstance(model, SelfNormalized):
        m = _uniform_band(rng, model.magnitude_low, model.magnitude_high,
                          model.n)
        csum = np.cumsum(m * m)
        scales = m / math.sqrt(csum[-1])
        signs = _signs_from_uniforms(rng.random(model.n), lam, scales)
        xi = scales * signs
        qc_tail = csum / csum[-1]
    elif isinstance(model, RegressionModel):
        phi = _uniform_band(rng, model.covariate_low, model.covariate_high,
                            model.n)
        csum = np.cumsum(phi * phi)
        t = phi / math.sqrt(csum[-1])  # normalized step scales
        u = rng.random(model.n)
        if model.noise is NoiseFamily.RADEMACHER_SCALED:
            xi = t * _signs_from_uniforms(u, lam, t)
        else:
            support = 2.0 * t
            xi = support * _three_point_outcomes(u, lam, support)
        qc_tail = csum / csum[-1]
    else:
        _require_model(model)
        raise AssertionError("unreachable")
    sums = np.concatenate(([0.0], np.cumsum(xi)))
    qc = np.concatenate(([0.0], qc_tail))
    sq = math.fsum(v * v for v in xi.tolist())
    return PathSample(xi, sums, qc, sq, int(seed), model_id(model),
                      int(path_index))


def simulate_path(model: MartingaleModel, seed: int, *,
                  path_index: int = 0) -> PathSample:
    """Draw one path under the model's own law; deterministic in the key."""
    _require_model(model)
    return _generate(model, 0.0, seed, path_index)


def simulate_tilted_path(model: MartingaleModel, lam: float, seed: int, *,
                         path_index: int = 0) -> PathSample:
    """Draw one path under the exponentially tilted law at tilt lam.

    Magnitudes and covariates keep their untilted law (the change of
    measure integrates to one over each step's sign variable alone); only
    the per-step outcome probabilities move.  Shares the plain sampler's
    uniforms, so lam = 0 reproduces simulate_path exactly.
    """
    _require_model(model)
    if not math.isfinite(lam) or lam < 0.0:
        raise DomainError(f"tilt must be finite and nonnegative, got {lam}")
    eps = model.bernstein_params().epsilon
    if lam * eps >= 1.0:
        raise DomainError(
            f"tilt {lam:.6g} is outside [0, 1/eps) for eps = {eps:.6g}")
    return _generate(model, lam, seed, path_index)


def _log_cosh(t: np.ndarray) -> np.ndarray:
    a = np.abs(t)
    return a + np.log1p(np.exp(-2.0 * a)) - _LOG2


def _three_point_psi(t: np.ndarray) -> np.ndarray:
    """log E[e^{lam xi}] for the {-c, 0, +c} step, t = lam*c >= 0."""
    out = np.empty_like(t)
    small = t < 32.0
    out[small] = np.log(0.75 + 0.25 * np.cosh(t[small]))
    tb = t[~small]
    out[~small] = tb - _LOG8 + np.log1p(6.0 * np.exp(-tb) + np.exp(-2.0 * tb))
    return out


def _three_point_drift_factor(t: np.ndarray) -> np.ndarray:
    """sinh(t)/(3 + cosh(t)), the tilted mean in units of the support c."""
    out = np.empty_like(t)
    small = t < 32.0
    ts = t[small]
    out[small] = np.sinh(ts) / (3.0 + np.cosh(ts))
    e = np.exp(-t[~small])
    out[~small] = (1.0 - e * e) / (1.0 + 6.0 * e + e * e)
    return out


def _step_structure(model: MartingaleModel, path: PathSample):
    """(three_point, scales, half_cosh_ok) for the path's conditional laws.

    For two-point steps the realized magnitude is the conditional scale,
    so |differences| recovers it exactly.  The three-point regression
    noise hides its support when the outcome is 0; there the support is
    rebuilt from the quadratic-characteristic increments (variance of a
    {-c,0,+c} step with P(+-)=1/8 is c^2/4).
    """
    if isinstance(model, ScaledRademacher):
        return False, np.asarray(model.weights), True
    if isinstance(model, VarianceSwitch):
        return False, np.abs(path.differences), False
    if isinstance(model, SelfNormalized):
        return False, np.abs(path.differences), True
    if isinstance(model, RegressionModel):
        if model.noise is NoiseFamily.RADEMACHER_SCALED:
            return False, np.abs(path.differences), True
        return True, 2.0 * np.sqrt(np.diff(path.qc)), False
    _require_model(model)
    raise AssertionError("unreachable")


def conjugate_stats(path: PathSample, model: MartingaleModel,
                    lam: float) -> ConjugatePathStats:
    """Evaluate Z, Psi, B and the centered remainder Y at tilt lam.

    The identities log Z = lam*S_n - Psi and S_n = Y + B hold exactly by
    construction (each is computed from the other two), which is what the
    per-path hard checks rely on.
    """
    _require_model(model)
    if not math.isfinite(lam) or lam < 0.0:
        raise DomainError(f"tilt must be finite and nonnegative, got {lam}")
    eps = model.bernstein_params().epsilon
    if lam * eps >= 1.0:
        raise DomainError(
            f"tilt {lam:.6g} is outside [0, 1/eps) for eps = {eps:.6g}")
    if path.model_id != model_id(model):
        raise DomainError(
            f"path belongs to {path.model_id}, not {model_id(model)}")
    three_point, scales, half_cosh_ok = _step_structure(model, path)
    t = lam * scales
    if three_point:
        psi_steps = _three_point_psi(t)
        b_steps = scales * _three_point_drift_factor(t)
    else:
        psi_steps = _log_cosh(t)
        b_steps = scales * np.tanh(t)
    psi = float(np.cumsum(psi_steps)[-1]) if psi_steps.size else 0.0
    b_drift = float(np.cumsum(b_steps)[-1]) if b_steps.size else 0.0
    sn = path.final
    log_z = lam * sn - psi
    return ConjugatePathStats(
        lam=float(lam), z=math.exp(log_z), log_z=log_z, psi=psi,
        b_drift=b_drift, y=sn - b_drift, per_step_b=b_steps,
        per_step_psi=psi_steps, half_cosh_applicable=half_cosh_ok)


@dataclass(frozen=True)
class A1Report:
    """Margins of the conditional moment-growth condition.

    ``margins[i, j]`` is the relative slack (bound/moment-ratio - 1) of
    step-row i at even order ``orders[j]``; exchangeable families collapse
    to a single worst-case row.  ``binding_eps`` is the smallest scale that
    would still pass every checked order, so passing means binding_eps is
    at most the declared scale.
    """

    declared_eps: float
    binding_eps: float
    orders: tuple
    margins: np.ndarray
    worst_margin: float
    passed: bool


def verify_A1(model: MartingaleModel, max_order: int = 12,
              tol: float = 1e-9) -> A1Report:
    """Check the moment-growth condition from exact conditional moments.

    All families have conditionally symmetric steps, so odd conditional
    moments vanish and only even orders 2..max_order carry content.  Each
    even order compares |E[xi^l | past]| / E[xi^2 | past] against
    (l!/2) eps^(l-2) at the declared eps, using worst-case step scales for
    the families whose scales are random.
    """
    _require_model(model)
    if max_order < 2:
        raise DomainError(f"max_order must be at least 2, got {max_order}")
    eps = model.bernstein_params().epsilon

    def ratio(base: float, order: int, moment_factor: float = 1.0) -> float:
        return base ** (order - 2) * moment_factor

    if isinstance(model, ScaledRademacher):
        rows = [("w[%d]" % i, w, 1.0) for i, w in enumerate(model.weights)]
    elif isinstance(model, VarianceSwitch):
        rows = [("worst", math.sqrt((1.0 + model.delta ** 2) / model.n), 1.0)]
    elif isinstance(model, SelfNormalized):
        rows = [("worst",
                 model.magnitude_high / (model.magnitude_low
                                         * math.sqrt(model.n)), 1.0)]
    else:
        base = model.eps1_worst
        if model.noise is NoiseFamily.RADEMACHER_SCALED:
            rows = [("worst", base, 1.0)]
        else:
            rows = [("worst", 2.0 * base, 1.0)]

    orders = tuple(range(2, max_order + 1, 2))
    margins = np.empty((len(rows), len(orders)))
    for i, (_, base, factor) in enumerate(rows):
        for j, order in enumerate(orders):
            bound = 0.5 * math.factorial(order) * eps ** (order - 2)
            margins[i, j] = bound / ratio(base, order, factor) - 1.0
    worst = float(margins.min())

    binding = 0.0
    for _, base, factor in rows:
        for order in orders:
            if order < 4:
                continue
            need = (ratio(base, order, factor)
                    / (0.5 * math.factorial(order))) ** (1.0 / (order - 2))
            binding = max(binding, need)
    return A1Report(declared_eps=eps, binding_eps=binding, orders=orders,
                    margins=margins, worst_margin=worst,
                    passed=worst >= -tol)


def verify_A2(model: MartingaleModel):
    """(delta^2 bound on |<S>_n - 1|, whether it is exact by construction)."""
    _require_model(model)
    if isinstance(model, VarianceSwitch):
        return model.delta ** 2, True
    # the other three families are normalized to <S>_n = 1 identically
    return 0.0, True


_LEMMA_ALLOW = 1e-12  # rounding allowance on the hard inequalities


@dataclass(frozen=True)
class LemmaReport:
    """Slack of the drift and log-MGF bounds at one (path, tilt) pair.

    ``lower_c_required`` reports the constant that would make the linear
    lower drift bound lam(1 - delta^2) - c lam^2 eps tight from below; it
    is informational, never asserted, because no explicit value exists.
    """

    lam: float
    b_value: float
    b_bound: float
    psi_value: float
    psi_bound: float
    half_cosh_bound: float | None
    half_cosh_worst: float | None
    lower_c_required: float
    violations: tuple

    @property
    def passed(self) -> bool:
        return not self.violations


def lemma_checks(stats: ConjugatePathStats,
                 params: BernsteinParams) -> LemmaReport:
    """Compare realized B and Psi with their closed-form ceilings.

    Violations are reported, not raised, so callers can aggregate them
    over a batch and escalate with replay coordinates.
    """
    lam = stats.lam
    eps, d2 = params.epsilon, params.delta ** 2
    if lam * eps >= 1.0:
        raise DomainError(
            f"tilt {lam:.6g} is outside [0, 1/eps) for eps = {eps:.6g}")
    one_minus = 1.0 - lam * eps
    b_bound = (lam - 0.5 * lam * lam * eps) * (1.0 + d2) / one_minus ** 2
    psi_bound = lam * lam * (1.0 + d2) / (2.0 * one_minus)

    violations = []
    if stats.b_drift > b_bound + _LEMMA_ALLOW * max(1.0, abs(b_bound)):
        violations.append(
            f"drift bound: B = {stats.b_drift!r} > {b_bound!r}")
    if stats.psi > psi_bound + _LEMMA_ALLOW * max(1.0, abs(psi_bound)):
        violations.append(
            f"log-MGF bound: Psi = {stats.psi!r} > {psi_bound!r}")

    half_bound = half_worst = None
    if stats.half_cosh_applicable:
        half_bound = 0.5 * lam * lam
        prefixes = np.cumsum(stats.per_step_psi)
        half_worst = float(prefixes.max()) if prefixes.size else 0.0
        if half_worst > half_bound + _LEMMA_ALLOW * max(1.0, half_bound):
            violations.append(
                f"half-cosh bound: max Psi_k = {half_worst!r} > {half_bound!r}")

    if lam > 0.0 and eps > 0.0:
        lower_c = (lam * (1.0 - d2) - stats.b_drift) / (lam * lam * eps)
    else:
        lower_c = 0.0
    return LemmaReport(
        lam=lam, b_value=stats.b_drift, b_bound=b_bound, psi_value=stats.psi,
        psi_bound=psi_bound, half_cosh_bound=half_bound,
        half_cosh_worst=half_worst, lower_c_required=lower_c,
        violations=tuple(violations))


def bolthausen_augment(path: PathSample, epsilon: float, seed: int, *,
                       path_index: int = 0) -> PathSample:
    """Stop at the last time <S> <= 1 and pad the variance up to exactly 1.

    The padding block is floor((1 - <S>_tau)/eps^2) independent +-eps
    steps, one Rademacher-signed step whose squared size is the leftover
    variance, then zero steps to the fixed length n + floor(1/eps^2) + 1.
    The closing subtraction 1 - <S> happens above 3/4, where it is exact,
    so the augmented characteristic ends within a few ulp of 1.
    """
    if not math.isfinite(epsilon) or epsilon <= 0.0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    e2 = epsilon * epsilon
    tail_capacity = math.floor(1.0 / e2)
    n = path.n

    # tau = last index with <S>_k <= 1; qc is nondecreasing
    tau = int(np.searchsorted(path.qc, 1.0, side="right")) - 1
    qc_tau = float(path.qc[tau])
    leftover = 1.0 - qc_tau

    r = min(int(leftover / e2), tail_capacity)
    while r > 0 and r * e2 > leftover:
        r -= 1
    qc_mid = qc_tau + r * e2
    closing_var = max(0.0, 1.0 - qc_mid)
    closing = math.sqrt(closing_var)

    rng = generator_for(seed, STREAM_AUGMENT, path_index)
    signs = np.where(rng.random(r + 1) < 0.5, 1.0, -1.0)

    pad = tail_capacity - r
    stopped = np.array(path.differences)
    stopped[tau:] = 0.0
    diffs = np.concatenate(
        (stopped, signs[:r] * epsilon, [signs[r] * closing], np.zeros(pad)))
    final_qc = qc_mid + closing * closing
    qc = np.concatenate(
        (path.qc[:tau + 1], np.full(n - tau, qc_tau),
         qc_tau + e2 * np.arange(1, r + 1), [final_qc],
         np.full(pad, final_qc)))
    sums = np.concatenate(([0.0], np.cumsum(diffs)))
    sq = math.fsum(v * v for v in diffs.tolist())
    return PathSample(diffs, sums, qc, sq, int(seed),
                      path.model_id + "#aug", int(path_index))


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def path_to_csv(path: PathSample, dest) -> None:
    """Dump a path as (step, xi, s, qc) rows; step 0 has no difference."""
    def write(f: IO[str]) -> None:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["step", "xi", "s", "qc"])
        w.writerow([0, "", _fmt(path.partial_sums[0]), _fmt(path.qc[0])])
        for k in range(1, path.n + 1):
            w.writerow([k, _fmt(path.differences[k - 1]),
                        _fmt(path.partial_sums[k]), _fmt(path.qc[k])])

    if hasattr(dest, "write"):
        write(dest)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as f:
            write(f)
