"""Stage-unrolled ADMM around a diagonal-gain data term.

The estimate x is split against two auxiliary variables: u for the spatial
prior and v for the temporal prior, each with its own scaled dual.  One
inner iteration is

    x   <- argmin 0.5 * ||y - a*x||^2 + mu/2 * (||x - (u - yb)||^2
                                              + ||x - (v - zb)||^2)
    u   <- spatial_prior(yb + x);    yb <- yb + x - u
    v   <- temporal_prior(zb + x);   zb <- zb + x - v

which has the closed form x = (a*y + mu*(xs + xt)) / (a^2 + 2*mu).  A stage
is a fixed number of inner iterations with freshly zeroed duals; unrolling
several stages refines the estimate the way a learned cascade would, with
the prior configuration playing the role of stage weights.

All arithmetic is float64; priors are plain callables (frame in, frame out)
so anything from an identity to a full spatio-temporal model plugs in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .frameio import FrameWindow

__all__ = [
    "NumericalError",
    "StageConfig",
    "SolverState",
    "init_state",
    "x_update",
    "prox_targets",
    "dual_update_spatial",
    "dual_update_temporal",
    "residuals",
    "run_stage",
]


class NumericalError(Exception):
    """Raised when the iteration produces non-finite values."""


@dataclass(frozen=True)
class StageConfig:
    """Per-stage solver parameters.

    ``lambda_s``/``lambda_t`` are recorded prior weights: the classical
    priors absorb their effect through their own strength knobs, so these
    fields are configuration bookkeeping rather than multipliers.
    """

    mu: float = 1.0
    rho_step: float = 0.5
    lambda_s: float = 1.0
    lambda_t: float = 1.0
    inner_iters: int = 3
    num_stages: int = 2

    def __post_init__(self) -> None:
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if not 0.0 < self.rho_step <= 1.0:
            raise ValueError("rho_step must lie in (0, 1]")
        if self.lambda_s < 0.0 or self.lambda_t < 0.0:
            raise ValueError("prior weights must be nonnegative")
        if self.inner_iters < 1 or self.num_stages < 1:
            raise ValueError("inner_iters and num_stages must be at least 1")


@dataclass
class SolverState:
    """All iterates of one frame's solve.

    ``x`` is the running estimate, ``u``/``v`` the prior splits and
    ``y_bar``/``z_bar`` the scaled duals.  The observation ``y_obs`` and the
    per-pixel gain ride along so a stage can be re-run without extra
    context.
    """

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    y_bar: np.ndarray
    z_bar: np.ndarray
    y_obs: np.ndarray
    gain: np.ndarray
    stage: int = 0
    inner_iter: int = 0


def init_state(y: np.ndarray, gain: float | np.ndarray = 1.0) -> SolverState:
    """Start from the observation: x = u = v = y, duals at zero."""
    y = np.asarray(y, dtype=np.float64)
    g = np.asarray(gain, dtype=np.float64)
    if g.ndim == 2 and y.ndim == 3:
        g = g[:, :, None]
    return SolverState(
        x=y.copy(),
        u=y.copy(),
        v=y.copy(),
        y_bar=np.zeros_like(y),
        z_bar=np.zeros_like(y),
        y_obs=y.copy(),
        gain=g,
    )


def x_update(
    y: np.ndarray,
    gain: float | np.ndarray,
    x_tilde_s: np.ndarray,
    x_tilde_t: np.ndarray,
    mu: float,
) -> np.ndarray:
    """Exact minimizer of the quadratic data-plus-coupling objective.

    Solves ``min_x 0.5*||y - a*x||^2 + mu/2*(||x - xs||^2 + ||x - xt||^2)``
    pixelwise: ``x = (a*y + mu*(xs + xt)) / (a^2 + 2*mu)``.
    """
    a = np.asarray(gain, dtype=np.float64)
    denom = a * a + 2.0 * mu
    if np.any(denom == 0.0):
        raise ValueError("a^2 + 2*mu vanishes; need gain > 0 or mu > 0")
    return (a * np.asarray(y, dtype=np.float64) + mu * (x_tilde_s + x_tilde_t)) / denom


def prox_targets(state: SolverState) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Current inputs of the four sub-steps.

    Returns ``(x_tilde_s, x_tilde_t, u_tilde, v_tilde)`` where the x-targets
    feed the data update and the u/v-targets feed the priors.
    """
    x_tilde_s = state.u - state.y_bar
    x_tilde_t = state.v - state.z_bar
    u_tilde = state.y_bar + state.x
    v_tilde = state.z_bar + state.x
    return x_tilde_s, x_tilde_t, u_tilde, v_tilde


def dual_update_spatial(y_bar: np.ndarray, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Scaled ascent step for the spatial constraint: yb + (x - u)."""
    return y_bar + (x - u)


def dual_update_temporal(z_bar: np.ndarray, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Scaled ascent step for the temporal constraint: zb + (x - v)."""
    return z_bar + (x - v)


def residuals(state: SolverState) -> tuple[float, float]:
    """Mean absolute feasibility gaps (r_s, r_t) = (|x - u|, |x - v|)."""
    r_s = float(np.mean(np.abs(state.x - state.u)))
    r_t = float(np.mean(np.abs(state.x - state.v)))
    return r_s, r_t


Prior = Callable[..., np.ndarray]


def run_stage(
    state: SolverState,
    cfg: StageConfig,
    intra_prior: Prior,
    inter_prior: Prior,
    window_provider: Optional[Callable[[np.ndarray], FrameWindow]] = None,
    log: Optional[list] = None,
) -> SolverState:
    """Run one unrolled stage in place and return the state.

    Duals restart at zero (each stage is its own consensus round).  When
    ``window_provider`` is given it is called with the current temporal
    target and must return the FrameWindow the temporal prior should fuse;
    the prior is then invoked as ``inter_prior(target, window)``.  ``log``
    collects ``(stage, inner_iter, r_s, r_t)`` telemetry rows.
    """
    state.y_bar = np.zeros_like(state.x)
    state.z_bar = np.zeros_like(state.x)
    state.inner_iter = 0
    for _ in range(cfg.inner_iters):
        x_tilde_s, x_tilde_t, _, _ = prox_targets(state)
        state.x = x_update(state.y_obs, state.gain, x_tilde_s, x_tilde_t, cfg.mu)
        _, _, u_tilde, _ = prox_targets(state)
        try:
            state.u = np.asarray(intra_prior(u_tilde), dtype=np.float64)
        except Exception as exc:
            raise RuntimeError(
                f"spatial prior failed at stage {state.stage}, inner iter {state.inner_iter + 1}: {exc}"
            ) from exc
        state.y_bar = dual_update_spatial(state.y_bar, state.x, state.u)
        _, _, _, v_tilde = prox_targets(state)
        try:
            if window_provider is not None:
                state.v = np.asarray(inter_prior(v_tilde, window_provider(v_tilde)), dtype=np.float64)
            else:
                state.v = np.asarray(inter_prior(v_tilde), dtype=np.float64)
        except Exception as exc:
            raise RuntimeError(
                f"temporal prior failed at stage {state.stage}, inner iter {state.inner_iter + 1}: {exc}"
            ) from exc
        state.z_bar = dual_update_temporal(state.z_bar, state.x, state.v)
        state.inner_iter += 1
        if log is not None:
            log.append((state.stage, state.inner_iter, *residuals(state)))
    if not (np.all(np.isfinite(state.x)) and np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.v))):
        raise NumericalError(f"non-finite iterate after stage {state.stage}")
    state.stage += 1
    return state
