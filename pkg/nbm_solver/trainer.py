"""Training loop: preconditioned residual loss, Adam, learning-rate decay and domain switching."""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import torch

from .baseline import PinnBaseline
from .errors import TrainingDivergedError
from .footprint import assemble_footprint
from .network import SurrogatePair
from .problem import ProblemSpec
from .sampling import CollocationPoints

logger = logging.getLogger(__name__)

SWITCHING_MODES = ("off", "whole-fast", "fast-whole-slow")


@dataclass
class TrainConfig:
    epochs: int = 1000
    # 0 trains on all points at once
    batch_size: int = 0
    lr0: float = 1e-2
    decay_rate: float = 0.975
    decay_scale: float = 100.0
    clip_norm: float = 1.0
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    switching: str = "off"
    tau: int = 4
    approach: str = "regression"
    bias: str = "bias_slow"
    multires_levels: int = 1
    workers: int = 0
    seed: int = 0
    log_every: int = 100


@dataclass
class HistoryRow:
    epoch: int
    loss: float
    lr: float
    region: int
    wall_seconds: float


@dataclass
class TrainState:
    """Optimizer, step counter and shuffling generator of a run."""
    optimizer: torch.optim.Adam
    rng: np.random.Generator
    step: int = 0
    epoch: int = 0
    region: int = 0
    last_finite_loss: float = float("nan")
    history: List[HistoryRow] = field(default_factory=list)


def lr_at(cfg: TrainConfig, k: int) -> float:
    """Learning rate ``lr0 * decay_rate ** (k / decay_scale)`` at optimizer step ``k``."""
    if k < 0:
        raise ValueError(f"step must be nonnegative, got {k}")
    return cfg.lr0 * cfg.decay_rate ** (k / cfg.decay_scale)


def region_schedule(cfg: TrainConfig, epoch: int) -> int:
    """
    Region trained at ``epoch``.

    Positive values train only the fast-diffusion network, negative values
    only the slow one, and zero trains both.
    """
    if cfg.switching == "off":
        return 0
    if cfg.switching == "whole-fast":
        return epoch % cfg.tau
    if cfg.switching == "fast-whole-slow":
        return cfg.tau // 2 - epoch % cfg.tau
    raise ValueError(f"unknown switching mode {cfg.switching!r}")


def fast_side(spec: ProblemSpec, points: CollocationPoints) -> str:
    """Side whose mean diffusion coefficient over the collocation points is larger."""
    mu_minus = float(np.mean(spec.value("mu_minus", points.positions)))
    mu_plus = float(np.mean(spec.value("mu_plus", points.positions)))
    return "minus" if mu_minus > mu_plus else "plus"


def make_state(pair: SurrogatePair, cfg: TrainConfig) -> TrainState:
    optimizer = torch.optim.Adam(pair.parameters(), lr=cfg.lr0, betas=tuple(cfg.adam_betas), eps=cfg.adam_eps)
    return TrainState(optimizer=optimizer, rng=np.random.default_rng(cfg.seed))


def clip_gradients(parameters, max_norm: float) -> float:
    """Scale gradients in place so their global norm is at most ``max_norm``; returns the norm before."""
    parameters = [p for p in parameters if p.grad is not None]
    if not parameters:
        return 0.0
    return float(torch.nn.utils.clip_grad_norm_(parameters, max_norm))


def adam_step(state: TrainState, lr: float) -> None:
    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.step()
    state.step += 1


def loss_and_grads(objective, pair: SurrogatePair, batch, normalizer: Optional[float] = None) -> torch.Tensor:
    """
    Loss of one batch with gradients accumulated into the parameters' ``.grad``.

    ``objective`` is a :class:`CompiledFootprint` or a :class:`PinnBaseline`.
    The loss is the sum of squared (preconditioned) residual rows of the
    batch divided by ``normalizer``, the batch size by default; every
    resolution level of a point adds its own row. Non-finite losses are
    returned without backpropagation.
    """
    normalizer = float(len(batch)) if normalizer is None else float(normalizer)
    residuals = objective.batch_residuals(pair, batch)
    loss = (residuals ** 2).sum() / normalizer
    if torch.isfinite(loss) and loss.requires_grad:
        loss.backward()
    return loss


def build_objective(spec: ProblemSpec, points: CollocationPoints, cfg: TrainConfig):
    """The residual source for ``cfg.approach``: compiled finite-volume rows or the PINN baseline."""
    if cfg.approach == "pinn":
        return PinnBaseline(spec, points.positions, points.kinds, points.h)
    return assemble_footprint(
        spec, points.positions, points.h, cfg.approach, cfg.bias, cfg.multires_levels, cfg.workers
    )


def _active_points(points, region, fast, sides):
    if region == 0:
        return np.arange(len(points))
    target = fast if region > 0 else ("plus" if fast == "minus" else "minus")
    return np.flatnonzero(sides == target)


def train(
        spec: ProblemSpec,
        pair: SurrogatePair,
        cfg: TrainConfig,
        points: CollocationPoints,
        objective=None,
        on_epoch: Optional[Callable[[TrainState], None]] = None,
) -> TrainState:
    """
    Optimize ``pair`` in place.

    Each epoch reshuffles the points of the active region, steps Adam on
    every batch after global-norm clipping, and appends a history row with
    the mean batch loss. Under domain switching the inactive network's
    gradients are dropped so its parameters stay untouched.

    Raises
    ------
    TrainingDivergedError
        If a batch loss is not finite.
    """
    if objective is None:
        objective = build_objective(spec, points, cfg)
    state = make_state(pair, cfg)
    fast = fast_side(spec, points)
    sides = points.sides(spec)
    start = time.perf_counter()
    logger.info("training %d points for %d epochs (fast side: %s)", len(points), cfg.epochs, fast)

    for epoch in range(cfg.epochs):
        state.epoch = epoch
        state.region = region = region_schedule(cfg, epoch)
        if region == 0:
            frozen = []
        elif region > 0:
            frozen = [pair.network("plus" if fast == "minus" else "minus")]
        else:
            frozen = [pair.network(fast)]

        active = state.rng.permutation(_active_points(points, region, fast, sides))
        size = cfg.batch_size if cfg.batch_size > 0 else max(len(active), 1)
        losses = []
        for begin in range(0, len(active), size):
            batch = active[begin:begin + size]
            state.optimizer.zero_grad(set_to_none=True)
            loss = loss_and_grads(objective, pair, batch)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    epoch, state.step, state.last_finite_loss,
                    state_dump={k: v.detach().clone() for k, v in pair.state_dict().items()},
                )
            for net in frozen:
                for p in net.parameters():
                    p.grad = None
            clip_gradients(pair.parameters(), cfg.clip_norm)
            adam_step(state, lr_at(cfg, state.step))
            state.last_finite_loss = value
            losses.append(value)

        row = HistoryRow(
            epoch=epoch,
            loss=float(np.mean(losses)) if losses else float("nan"),
            lr=lr_at(cfg, state.step),
            region=region,
            wall_seconds=time.perf_counter() - start,
        )
        state.history.append(row)
        if cfg.log_every and (epoch % cfg.log_every == 0 or epoch == cfg.epochs - 1):
            logger.info("epoch %d: loss %.6e lr %.3e region %d", epoch, row.loss, row.lr, region)
        if on_epoch is not None:
            on_epoch(state)
    return state


def multires_residual(spec: ProblemSpec, pair: SurrogatePair, point, h: float, levels: int,
                      approach: str = "regression", bias: str = "bias_slow") -> float:
    """Sum over levels of the squared preconditioned residual with cell size ``h / 2**level``."""
    if levels < 1:
        raise ValueError(f"levels must be at least 1, got {levels}")
    compiled = assemble_footprint(spec, np.asarray(point).reshape(1, 3), h, approach, bias, levels)
    scaled, _ = compiled.residuals(pair)
    return float((scaled.detach() ** 2).sum())
