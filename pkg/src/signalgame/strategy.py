"""Executable equilibrium policies read off a solved game.

The principal's stage policy splits the current belief onto the
vertices of that stage's triangulation: the experiment's messages are
labeled by vertex indices and each message moves the receiver's
posterior exactly onto the corresponding vertex.  The receiver's
policy best-responds to the stage action values, breaking near-ties in
the principal's favor, which reproduces the actions stored at the
vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .game import Belief, Experiment, split_experiment
from .geometry import SupportMeasure, barycentric_indices
from .solver import EquilibriumSolution, receiver_best

__all__ = [
    "PrincipalPolicy",
    "ReceiverPolicy",
    "principal_action",
    "receiver_action",
]


def _coords(belief) -> np.ndarray:
    return belief.coords if isinstance(belief, Belief) else np.asarray(belief, dtype=float)


def _check_stage(solution: EquilibriumSolution, stage: int, belief) -> None:
    if not 1 <= stage <= solution.spec.horizon:
        raise ValueError(f"stage {stage} outside 1..{solution.spec.horizon}")
    if isinstance(belief, Belief) and belief.stage != stage:
        raise ValueError(f"belief is stamped for stage {belief.stage}, not {stage}")


def principal_action(solution: EquilibriumSolution, stage: int, belief) -> Experiment:
    """Equilibrium experiment at a belief: the barycentric split.

    Messages are labeled by the triangulation vertex indices they
    induce; at a vertex the experiment is a single uninformative
    message.
    """
    _check_stage(solution, stage, belief)
    stage_solution = solution.stage(stage)
    pi = _coords(belief)
    ids, weights = barycentric_indices(stage_solution.triangulation, pi)
    atoms = stage_solution.triangulation.vertices[ids]
    experiment = split_experiment(pi, SupportMeasure(atoms, weights))
    return replace(experiment, labels=tuple(int(i) for i in ids))


def receiver_action(solution: EquilibriumSolution, stage: int, belief) -> int:
    """Equilibrium action index at a post-experiment belief."""
    _check_stage(solution, stage, belief)
    stage_solution = solution.stage(stage)
    q_a, q_b = stage_solution.objective.q_single(_coords(belief))
    return receiver_best(q_a, q_b)[3]


@dataclass(frozen=True, eq=False)
class PrincipalPolicy:
    """Stage-indexed experiment chooser for the principal."""

    solution: EquilibriumSolution

    def action(self, stage: int, belief) -> Experiment:
        return principal_action(self.solution, stage, belief)


@dataclass(frozen=True, eq=False)
class ReceiverPolicy:
    """Stage-indexed action chooser for the receiver."""

    solution: EquilibriumSolution

    def action(self, stage: int, belief) -> int:
        return receiver_action(self.solution, stage, belief)
