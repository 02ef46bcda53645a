"""End-to-end k-way partitioning.

Coarsens the hypergraph, generates embedding-driven initial partitions on
the coarsest level, repairs and pairwise-improves each, keeps the best, and
projects it back up with FM refinement at every level.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .apg import ApgParams, minimize, seeded_features
from .coarsen import Hierarchy, coarsen
from .coarsen import project_partition as _project
from .hypergraph import BalanceSpec, Hypergraph, Partition, is_feasible
from .initial import LARGE_SCALE_THRESHOLD, CandidateGrid, _p_choices, _route_partition
from .operators import ObjectiveOperator, clique_expand
from .refine import PairwiseParams, kway_fm, pairwise_improve, repair_feasibility

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "CandidateReport",
    "run_pipeline",
    "improve_partition",
]


@dataclass
class PipelineConfig:
    """Everything the pipeline can vary, with working defaults."""

    num_init: int = 10
    lambda1: tuple = (0.9, 0.5, 0.15, 0.015)
    lambda2: tuple = (1.0, 0.9, 0.8)
    xi1: tuple = (0.5, 0.15)
    xi2: tuple = (1.0, 0.8, 0.2)
    tau: float = 0.2
    p_rules: tuple = ("sqrt", "linear")
    p_override: int | None = None
    large_threshold: int = LARGE_SCALE_THRESHOLD
    coarsest_factor: int = 625
    coarsen_rounds: int = 20
    stall_ratio: float = 0.8
    pair_rounds: int = 5
    key_fraction: float = 0.05
    cut_fraction: float = 0.2
    fm_passes: int = 50
    apg: ApgParams = field(default_factory=ApgParams)
    threads: int = 1
    deterministic: bool = True

    def candidate_grid(self) -> CandidateGrid:
        return CandidateGrid(
            num_init=self.num_init,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            tau=self.tau,
            p_rules=self.p_rules,
            p_override=self.p_override,
            large_threshold=self.large_threshold,
            apg=self.apg,
        )

    def pairwise_params(self) -> PairwiseParams:
        return PairwiseParams(
            xi1_grid=self.xi1,
            xi2_grid=self.xi2,
            max_rounds=self.pair_rounds,
            key_fraction=self.key_fraction,
            cut_fraction=self.cut_fraction,
            apg=self.apg,
        )


@dataclass
class CandidateReport:
    lam1: float
    lam2: float
    p: int
    cutsize: int
    feasible: bool


@dataclass
class PipelineResult:
    partition: Partition
    feasible: bool
    cutsize: int
    timings: dict
    levels: int
    candidates: list


def _improve_candidate(h, part, spec, clique, pparams):
    part, _ = repair_feasibility(h, part, spec)
    return pairwise_improve(h, part, spec, pparams, clique=clique)


def _build_candidate(i, h, spec, clique, combos, grid, pparams):
    lam1, lam2 = combos[i % len(combos)]
    op = ObjectiveOperator.embedding(clique, h.vertex_weight, lam1, lam2)
    X = minimize(op, seeded_features(h.n, spec.k, stream=i), grid.apg).X
    best_part, best_p = None, None
    for p in _p_choices(h.n, spec.k, grid):
        part = _route_partition(X, h, spec, p, grid.tau, grid.large_threshold)
        if best_part is None or part.cutsize < best_part.cutsize:
            best_part, best_p = part, p
    part = _improve_candidate(h, best_part, spec, clique, pparams)
    return part, CandidateReport(
        lam1, lam2, best_p, part.cutsize, is_feasible(part, spec)
    )


def run_pipeline(
    h: Hypergraph, spec: BalanceSpec, config: PipelineConfig | None = None
) -> PipelineResult:
    """Partition ``h`` into ``spec.k`` blocks.

    The returned partition always covers every vertex; ``feasible`` reports
    whether all block weights ended within their caps.
    """
    config = config or PipelineConfig()
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    if spec.k == 1:
        part = Partition(h, np.zeros(h.n, dtype=np.int64), 1)
        timings["total"] = time.perf_counter() - t_start
        return PipelineResult(part, True, part.cutsize, timings, 0, [])

    t0 = time.perf_counter()
    hierarchy = coarsen(
        h,
        spec,
        coarsest_factor=config.coarsest_factor,
        stall_ratio=config.stall_ratio,
        max_rounds=config.coarsen_rounds,
    )
    coarse = hierarchy.coarsest(h)
    timings["coarsen"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    clique = clique_expand(coarse)
    grid = config.candidate_grid()
    pparams = config.pairwise_params()

    if coarse.n <= spec.k:
        # too few supervertices to embed meaningfully; spread them out
        part = Partition(coarse, np.arange(coarse.n, dtype=np.int64), spec.k)
        part = _improve_candidate(coarse, part, spec, clique, pparams)
        parts = [part]
        reports = [
            CandidateReport(0.0, 0.0, coarse.n, part.cutsize, is_feasible(part, spec))
        ]
    else:
        combos = [(l1, l2) for l1 in grid.lambda1 for l2 in grid.lambda2]
        indices = range(config.num_init)
        if config.deterministic or config.threads <= 1:
            results = [
                _build_candidate(i, coarse, spec, clique, combos, grid, pparams)
                for i in indices
            ]
        else:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                results = list(
                    pool.map(
                        lambda i: _build_candidate(
                            i, coarse, spec, clique, combos, grid, pparams
                        ),
                        indices,
                    )
                )
        parts = [r[0] for r in results]
        reports = [r[1] for r in results]
    timings["initial"] = time.perf_counter() - t0

    order = min(
        range(len(parts)),
        key=lambda i: (not reports[i].feasible, parts[i].cutsize, i),
    )
    part = parts[order]

    t0 = time.perf_counter()
    feasible = is_feasible(part, spec)
    for li in range(len(hierarchy.levels) - 1, -1, -1):
        finer = hierarchy.levels[li - 1].hypergraph if li > 0 else h
        part = _project(hierarchy.levels[li], part, finer)
        if feasible:
            part = kway_fm(finer, part, spec, max_passes=config.fm_passes)
    if not hierarchy.levels and feasible:
        part = kway_fm(h, part, spec, max_passes=config.fm_passes)
    timings["uncoarsen"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    return PipelineResult(
        part, is_feasible(part, spec), part.cutsize, timings,
        len(hierarchy), reports,
    )


def improve_partition(
    h: Hypergraph,
    p: Partition,
    spec: BalanceSpec,
    config: PipelineConfig | None = None,
) -> tuple[Partition, dict]:
    """Repair, pairwise-improve, and FM-refine an existing partition.

    Returns the refined partition and a report with before/after cutsizes,
    whether a repair was needed, and final feasibility.  Cutsize never
    increases when the input is already feasible.
    """
    config = config or PipelineConfig()
    before = p.cutsize
    needed_repair = not is_feasible(p, spec)
    part, repair_ok = repair_feasibility(h, p, spec)
    part = pairwise_improve(h, part, spec, config.pairwise_params())
    if is_feasible(part, spec):
        part = kway_fm(h, part, spec, max_passes=config.fm_passes)
    report = {
        "cutsize_before": before,
        "cutsize_after": part.cutsize,
        "repaired": needed_repair,
        "repair_ok": repair_ok,
        "feasible": is_feasible(part, spec),
    }
    return part, report
