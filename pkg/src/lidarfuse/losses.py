"""Scalar loss kernels of the box-refinement objective, with analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LossValue:
    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class LossConfig:
    eta: float = 2.0
    lam: float = 0.005
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    clamp_lo: float = 1e-3
    clamp_hi: float = 0.5
    # divide summed batch losses by their item count
    normalize: bool = False

    def __post_init__(self):
        if not self.clamp_lo < self.clamp_hi:
            raise ValueError("clamp_lo must be below clamp_hi")


DEFAULT_CONFIG = LossConfig()


def focal_loss(p: float, is_positive: bool, cfg: LossConfig = DEFAULT_CONFIG) -> LossValue:
    """``-alpha_t (1 - p_t)^gamma log(p_t)``; gradient is d/dp."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly inside (0, 1)")
    gamma = cfg.focal_gamma
    if is_positive:
        pt, alpha_t, sign = p, cfg.focal_alpha, 1.0
    else:
        pt, alpha_t, sign = 1.0 - p, 1.0 - cfg.focal_alpha, -1.0
    q = 1.0 - pt
    log_pt = np.log(pt)
    value = -alpha_t * q**gamma * log_pt
    mod_grad = gamma * q ** (gamma - 1.0) * log_pt if gamma != 0 else 0.0
    d_pt = alpha_t * (mod_grad - q**gamma / pt)
    return LossValue(float(value), np.array([sign * d_pt]))


def smooth_l1(u, u_star) -> LossValue:
    """Huber with unit transition, summed over components."""
    d = np.asarray(u, dtype=float) - np.asarray(u_star, dtype=float)
    a = np.abs(d)
    value = np.where(a < 1.0, 0.5 * d**2, a - 0.5).sum()
    return LossValue(float(value), np.clip(d, -1.0, 1.0))


def uct_multiplier(max_trace: float, cfg: LossConfig = DEFAULT_CONFIG) -> float:
    if max_trace < 0:
        raise ValueError("max_trace must be non-negative")
    return float(np.exp(1.0 - np.clip(max_trace, cfg.clamp_lo, cfg.clamp_hi)))


def uct_regularizer(max_trace: float, u_prime, cfg: LossConfig = DEFAULT_CONFIG) -> LossValue:
    """``exp(1 - clamp(max_trace)) * ||u'||``; gradient w.r.t. ``u'``, 0 at ``u' = 0``."""
    u_prime = np.asarray(u_prime, dtype=float)
    m = uct_multiplier(max_trace, cfg)
    norm = float(np.linalg.norm(u_prime))
    grad = np.zeros_like(u_prime) if norm == 0.0 else m * u_prime / norm
    return LossValue(m * norm, grad)


def drop_cosine(u) -> np.ndarray:
    """Residual without its trailing cosine term."""
    return np.asarray(u, dtype=float)[:-1]


def classification_loss(ps, labels, cfg: LossConfig = DEFAULT_CONFIG) -> LossValue:
    vals = [focal_loss(p, bool(y), cfg) for p, y in zip(ps, labels)]
    return _reduce(vals, cfg)


def regression_loss(us, u_stars, cfg: LossConfig = DEFAULT_CONFIG) -> LossValue:
    vals = [smooth_l1(u, s) for u, s in zip(us, u_stars)]
    return _reduce(vals, cfg)


def _reduce(vals, cfg: LossConfig) -> LossValue:
    if not vals:
        return LossValue(0.0, np.zeros(0))
    scale = 1.0 / len(vals) if cfg.normalize else 1.0
    total = sum(v.value for v in vals) * scale
    grad = np.concatenate([np.atleast_1d(v.gradient) for v in vals]) * scale
    return LossValue(float(total), grad)


def total_loss(reg: LossValue, cls: LossValue, uct: LossValue, cfg: LossConfig = DEFAULT_CONFIG) -> float:
    return reg.value + cfg.eta * cls.value + cfg.lam * uct.value
