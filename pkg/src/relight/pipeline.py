"""Sequence-level orchestration of the staged solver.

Each frame is solved independently from its own 5-frame window (no output
frame feeds a later window), which keeps runs order-independent and lets
frames be processed in parallel without changing a single bit of output.

Illumination candidate selection is pinned per run: a pre-pass solves a
reference frame with live quality feedback and records the winning
candidate per stage, and every frame then reuses those choices.  Selecting
per frame instead would let near-tied candidates flip between adjacent
frames and flicker the output brightness.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .frameio import FrameWindow, Sequence, window_at
from .intra import IlluminationProfile, IntraConfig, estimate_gain, intra_prox
from .inter import InterConfig, estimate_flow, inter_prox, refine_flow
from .quality import QualityModel
from .solver import NumericalError, StageConfig, init_state, run_stage

__all__ = ["PipelineConfig", "enhance_sequence", "enhance_frame"]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs besides the data itself."""

    solver: StageConfig = field(default_factory=StageConfig)
    intra: IntraConfig = field(default_factory=IntraConfig)
    inter: InterConfig = field(default_factory=InterConfig)
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


def _stage_intra_cfg(cfg: PipelineConfig, stage: int, selection: int | None) -> IntraConfig:
    # one candidate list per stage, derived deterministically from the run seed
    seed = int(np.random.SeedSequence([cfg.seed, 7, stage]).generate_state(1)[0])
    return replace(cfg.intra, seed=seed, fixed_selection=selection)


def _window_flows(members: list[np.ndarray], cfg: InterConfig) -> tuple[list, list]:
    center = members[2]
    to_c, from_c = [], []
    for j in (0, 1, 3, 4):
        f_to = estimate_flow(center, members[j], cfg.flow)
        f_from = estimate_flow(members[j], center, cfg.flow)
        if cfg.refine_steps:
            f_to = refine_flow(f_to, center, members[j], cfg.refine_steps, cfg.refine_step_size)
            f_from = refine_flow(f_from, members[j], center, cfg.refine_steps, cfg.refine_step_size)
        to_c.append(f_to)
        from_c.append(f_from)
    return to_c, from_c


def enhance_frame(
    seq: Sequence,
    t: int,
    cfg: PipelineConfig,
    profile: IlluminationProfile,
    scorer: QualityModel | None = None,
    selections: list[int | None] | None = None,
    record: dict[int, int] | None = None,
    log: list | None = None,
) -> np.ndarray:
    """Solve one frame from its window.

    ``selections`` pins the illumination candidate per stage (None entries
    select live via ``scorer``); ``record`` collects the choices actually
    made, keyed by stage; ``log`` receives (stage, iter, r_s, r_t) rows.
    """
    if selections is None:
        selections = [None] * cfg.solver.num_stages
    window = window_at(seq, t)
    y = window.center
    gain = estimate_gain(y, profile, cfg.intra.strength)
    state = init_state(y, gain)
    context = list(window.members)
    for stage in range(cfg.solver.num_stages):
        icfg = _stage_intra_cfg(cfg, stage, selections[stage])
        intra_scorer = scorer if selections[stage] is None else None

        def intra_prior(u_tilde: np.ndarray) -> np.ndarray:
            res = intra_prox(u_tilde, profile, intra_scorer, icfg)
            if record is not None:
                record[stage] = res.selected_candidate
            return res.enhanced

        # advance the neighbour context through the same spatial operator so
        # fusion compares like illumination with like; the centre's own
        # trajectory lives in the solver state
        stage_sel = selections[stage] if selections[stage] is not None else (
            record.get(stage, 0) if record is not None else 0
        )
        ctx_cfg = replace(icfg, fixed_selection=stage_sel)
        context = [intra_prox(f, profile, None, ctx_cfg).enhanced for f in context]
        flows_to, flows_from = _window_flows(context, cfg.inter)

        def window_provider(v_tilde: np.ndarray) -> FrameWindow:
            members = list(context)
            members[2] = v_tilde
            return FrameWindow(
                center_index=t,
                members=members,
                flows_to_center=list(flows_to),
                flows_from_center=list(flows_from),
            )

        def inter_prior(v_tilde: np.ndarray, win: FrameWindow) -> np.ndarray:
            return inter_prox(win, cfg.inter).enhanced

        state = run_stage(state, cfg.solver, intra_prior, inter_prior, window_provider, log=log)
    out = np.clip(state.x, 0.0, 1.0)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite output at frame {t}")
    return out


def enhance_sequence(
    seq: Sequence,
    cfg: PipelineConfig,
    profile: IlluminationProfile,
    scorer: QualityModel,
    telemetry: list | None = None,
) -> tuple[Sequence, list[tuple[int, int]]]:
    """Enhance a whole sequence; returns (output, per-stage selections).

    The candidate pre-pass runs on the middle frame; the frame loop then
    reuses its choices, optionally across a thread pool.  Frame order and
    thread count never influence the result: per-frame logs are merged in
    frame order after all workers finish.
    """
    t_ref = len(seq) // 2
    record: dict[int, int] = {}
    enhance_frame(seq, t_ref, cfg, profile, scorer, record=record)
    selections: list[int | None] = [record.get(s, 0) for s in range(cfg.solver.num_stages)]

    logs: list[list] | None = [[] for _ in seq.frames] if telemetry is not None else None

    def job(t: int) -> np.ndarray:
        return enhance_frame(
            seq, t, cfg, profile, None, selections=selections,
            log=logs[t] if logs is not None else None,
        )

    if cfg.threads == 1:
        frames = [job(t) for t in range(len(seq))]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            frames = list(pool.map(job, range(len(seq))))
    if telemetry is not None and logs is not None:
        for t, rows in enumerate(logs):
            telemetry.extend((t, *row) for row in rows)
    out = Sequence(frames, frame_rate=seq.frame_rate)
    chosen = [(s, selections[s]) for s in range(cfg.solver.num_stages)]
    return out, chosen
