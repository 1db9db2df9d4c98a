"""The extrinsic perturbation prior, bounded sampling and injection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .propagation import PerturbationPrior, PriorValidationError, _check_pivot
from .se3 import RigidTransform, so3_exp

# per-axis standard deviations of the reference prior: 1/20 m, 1/10 rad, 1/50 m
TRANSLATION_STD = 1.0 / 20.0
ROTATION_STD = 1.0 / 10.0
MEASUREMENT_STD = 1.0 / 50.0

DEFAULT_ALPHAS = (0.0, 0.02, 0.04, 0.06, 0.08, 0.1)
BOUND_STRATEGIES = ("clamp", "none")

Seed = Union[int, Sequence[int], np.random.SeedSequence]


def make_rng(seed: Seed) -> np.random.Generator:
    """PCG64 generator; the only RNG constructor used across the package."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derive_seed(seed: Seed, *keys: int) -> np.random.SeedSequence:
    """Independent child stream identified by integer ``keys``."""
    if isinstance(seed, np.random.SeedSequence):
        base = list(np.atleast_1d(seed.entropy))
    else:
        base = list(np.atleast_1d(seed))
    return np.random.SeedSequence([int(v) for v in base] + [int(k) for k in keys])


@dataclass(frozen=True)
class ThetaPrior:
    """A base prior with the extrinsic blocks scaled by ``alpha``."""

    base: PerturbationPrior
    alpha: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise PriorValidationError("alpha must be finite and non-negative")

    @property
    def effective(self) -> PerturbationPrior:
        return self.base.scaled(self.alpha)

    def with_alpha(self, alpha: float) -> ThetaPrior:
        return ThetaPrior(self.base, alpha)


@dataclass(frozen=True)
class SampledPerturbation:
    rho: np.ndarray
    phi: np.ndarray

    @classmethod
    def zero(cls) -> SampledPerturbation:
        return cls(np.zeros(3), np.zeros(3))


def default_theta() -> ThetaPrior:
    return ThetaPrior(
        PerturbationPrior.from_std(TRANSLATION_STD, ROTATION_STD, MEASUREMENT_STD), 1.0
    )


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_perturbation(prior: ThetaPrior, rng_seed: Seed, bound: str = "clamp") -> SampledPerturbation:
    """Draw ``(rho, phi)`` from the effective extrinsic prior.

    With ``bound="clamp"`` every component is clamped to its own one-sigma
    value. The same seed gives the same standard-normal draw for every
    ``alpha``, so samples at different levels differ only by scale.
    """
    if bound not in BOUND_STRATEGIES:
        raise ValueError(f"bound must be one of {BOUND_STRATEGIES}")
    eff = prior.effective
    z = make_rng(rng_seed).standard_normal(6)
    rho = _psd_sqrt(eff.P) @ z[:3]
    phi = _psd_sqrt(eff.Phi) @ z[3:]
    if bound == "clamp":
        rs = np.sqrt(np.clip(np.diag(eff.P), 0.0, None))
        ps = np.sqrt(np.clip(np.diag(eff.Phi), 0.0, None))
        rho = np.clip(rho, -rs, rs)
        phi = np.clip(phi, -ps, ps)
    return SampledPerturbation(rho, phi)


def inject(extrinsics: RigidTransform, s: SampledPerturbation, pivot: str = "base") -> RigidTransform:
    """Noisy extrinsics: the rotation is always left-multiplied by ``exp(phi^)``.

    ``pivot="base"`` also rotates the translation (``t = exp(phi^) t̄ + rho``);
    ``pivot="sensor"`` leaves it (``t = t̄ + rho``). The pivot must match the
    one used for propagation.
    """
    _check_pivot(pivot)
    dr = so3_exp(s.phi)
    rotation = dr @ extrinsics.rotation
    if pivot == "base":
        translation = dr @ extrinsics.translation + s.rho
    else:
        translation = extrinsics.translation + s.rho
    return RigidTransform(rotation, translation)


def alpha_sweep(levels: Iterable[float] = DEFAULT_ALPHAS, base: ThetaPrior | None = None) -> list[ThetaPrior]:
    base = base or default_theta()
    out = []
    for a in levels:
        if a < 0:
            raise PriorValidationError(f"negative alpha {a}")
        out.append(base.with_alpha(float(a)))
    return out
