"""Backward induction over the belief simplex.

Each stage is solved by (i) assembling the stage objectives q(pi, u)
for both players, where the continuation values are the next stage's
piecewise-linear value functions pulled back through the transition
kernel, (ii) evaluating the principal's tie-broken objective Psi (the
receiver picks an action maximizing their own q, breaking near-ties in
the principal's favor), and (iii) concavifying Psi.  The triangulation
chosen by the concavification carries BOTH value functions: the
receiver's stage value is interpolated on the same vertex set, because
in equilibrium the principal splits the belief onto those vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .game import Belief, GameSpec, SpecValidationError, validate_spec
from .geometry import (
    EPS_TIE,
    AffineFunctional,
    AffineMap,
    CellArrangement,
    PiecewiseAffine,
    Triangulation,
    VertexInterpolant,
    argcav,
    as_simplex_point,
    pullback_affine,
)

__all__ = [
    "StageObjective",
    "StageSolution",
    "EquilibriumSolution",
    "receiver_best",
    "q_values",
    "stage_backup",
    "solve",
]


@dataclass(frozen=True, eq=False)
class StageObjective:
    """Stage payoff data: rewards plus pulled-back continuation values.

    continuation entries are None for terminating actions and at the
    final stage, where the game yields no further payoff.
    """

    stage: int
    n_states: int
    n_actions: int
    reward_principal: np.ndarray
    reward_receiver: np.ndarray
    terminating: frozenset[int]
    continuation_principal: tuple[PiecewiseAffine | None, ...]
    continuation_receiver: tuple[PiecewiseAffine | None, ...]
    arrangement: CellArrangement

    def q_many(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Action values for both players at each row of points.

        Returns (q_principal, q_receiver), each of shape (k, n_actions).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        q_a = pts @ self.reward_principal
        q_b = pts @ self.reward_receiver
        for u in range(self.n_actions):
            if self.continuation_principal[u] is not None:
                q_a[:, u] += self.continuation_principal[u].evaluate_many(pts)
            if self.continuation_receiver[u] is not None:
                q_b[:, u] += self.continuation_receiver[u].evaluate_many(pts)
        return q_a, q_b

    def q_single(self, belief) -> tuple[np.ndarray, np.ndarray]:
        """Action values at one belief: two vectors of length n_actions."""
        pi = as_simplex_point(belief.coords if isinstance(belief, Belief) else belief)
        q_a, q_b = self.q_many(pi[None, :])
        return q_a[0], q_b[0]

    def tie_broken_values(self, points, tie_tol: float = EPS_TIE) -> tuple[np.ndarray, np.ndarray]:
        """(Psi, max q_receiver) rows: the receiver maximizes their own q
        within tie_tol and the principal collects the best q over that set."""
        q_a, q_b = self.q_many(points)
        top_b = q_b.max(axis=1)
        in_ties = q_b >= top_b[:, None] - tie_tol
        psi = np.where(in_ties, q_a, -np.inf).max(axis=1)
        return psi, top_b


def receiver_best(q_principal, q_receiver, tie_tol: float = EPS_TIE) -> tuple[tuple[int, ...], float, float, int]:
    """Receiver-optimal action set and the tie-broken selection.

    Returns (tie_set, receiver_value, principal_value, action): the
    tie_set collects actions within tie_tol of the receiver's best
    value; the chosen action maximizes the principal's value over the
    tie set (smallest action index on exact principal ties).
    """
    q_a = np.asarray(q_principal, dtype=float)
    q_b = np.asarray(q_receiver, dtype=float)
    if q_a.shape != q_b.shape or q_a.ndim != 1 or q_a.size == 0:
        raise ValueError("need two equal-length action value vectors")
    top = float(q_b.max())
    ties = np.where(q_b >= top - tie_tol)[0]
    action = int(ties[np.argmax(q_a[ties])])
    return tuple(int(i) for i in ties), top, float(q_a[action]), action


@dataclass(frozen=True, eq=False)
class StageSolution:
    """Solved stage: triangulation, vertex values, and vertex actions."""

    stage: int
    triangulation: Triangulation
    values_principal: np.ndarray
    values_receiver: np.ndarray
    vertex_actions: tuple[int, ...]
    objective: StageObjective

    @cached_property
    def interp_principal(self) -> VertexInterpolant:
        return VertexInterpolant(self.triangulation, self.values_principal)

    @cached_property
    def interp_receiver(self) -> VertexInterpolant:
        return VertexInterpolant(self.triangulation, self.values_receiver)

    def value_principal(self, omega) -> float:
        return self.interp_principal(np.asarray(omega, dtype=float))

    def value_receiver(self, omega) -> float:
        return self.interp_receiver(np.asarray(omega, dtype=float))


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """Stage solutions for t = 1..horizon plus the underlying spec."""

    spec: GameSpec
    stages: tuple[StageSolution, ...]

    def stage(self, t: int) -> StageSolution:
        if not 1 <= t <= len(self.stages):
            raise ValueError(f"stage {t} outside 1..{len(self.stages)}")
        return self.stages[t - 1]

    def values_at_prior(self) -> tuple[float, float]:
        first = self.stages[0]
        pi = self.spec.prior
        return first.value_principal(pi), first.value_receiver(pi)


def _build_objective(spec: GameSpec, stage: int, next_solution: StageSolution | None) -> StageObjective:
    n = spec.n_states(stage)
    n_act = spec.n_actions(stage)
    r_a = spec.rewards_principal[stage - 1]
    r_b = spec.rewards_receiver[stage - 1]
    cont_a: list[PiecewiseAffine | None] = [None] * n_act
    cont_b: list[PiecewiseAffine | None] = [None] * n_act
    pieces_a: list[list[AffineFunctional]] = []
    pieces_b: list[list[AffineFunctional]] = []
    functionals: list[AffineFunctional] = []
    for u in range(n_act):
        base_a = AffineFunctional(r_a[:, u], 0.0)
        base_b = AffineFunctional(r_b[:, u], 0.0)
        if spec.is_terminating(stage, u) or stage == spec.horizon or next_solution is None:
            pieces_a.append([base_a])
            pieces_b.append([base_b])
            continue
        mapping = AffineMap.linear(spec.kernels[stage - 1][:, u, :].T)
        pull_a = pullback_affine(next_solution.interp_principal, mapping)
        pull_b = pullback_affine(next_solution.interp_receiver, mapping)
        cont_a[u], cont_b[u] = pull_a, pull_b
        functionals.extend(pull_a.boundary)
        functionals.extend(pull_b.boundary)
        pieces_a.append([base_a + g for g in pull_a.pieces])
        pieces_b.append([base_b + g for g in pull_b.pieces])
    # Kinks of the tie-broken objective: receiver indifference loci (B-piece
    # differences) and, on tie regions, principal indifference loci.
    for u in range(n_act):
        for v in range(u + 1, n_act):
            functionals.extend(f - g for f in pieces_b[u] for g in pieces_b[v])
            functionals.extend(f - g for f in pieces_a[u] for g in pieces_a[v])
    return StageObjective(
        stage=stage,
        n_states=n,
        n_actions=n_act,
        reward_principal=r_a,
        reward_receiver=r_b,
        terminating=spec.terminating[stage - 1],
        continuation_principal=tuple(cont_a),
        continuation_receiver=tuple(cont_b),
        arrangement=CellArrangement(n, tuple(functionals)),
    )


def q_values(spec: GameSpec, stage: int, belief, next_solution: StageSolution | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stage action values at one belief.

    next_solution must be the solved stage t+1 (or None at the final
    stage); terminating actions contribute reward only.
    """
    spec._check_stage(stage)
    if isinstance(belief, Belief) and belief.stage != stage:
        raise ValueError(f"belief is stamped for stage {belief.stage}, not {stage}")
    if stage < spec.horizon and next_solution is None:
        raise ValueError(f"stage {stage} needs the stage-{stage + 1} solution")
    if next_solution is not None and next_solution.stage != stage + 1:
        raise ValueError(
            f"expected the stage-{stage + 1} solution, got stage {next_solution.stage}"
        )
    objective = _build_objective(spec, stage, next_solution)
    return objective.q_single(belief)


def stage_backup(
    spec: GameSpec,
    stage: int,
    next_solution: StageSolution | None = None,
    tie_tol: float = EPS_TIE,
) -> StageSolution:
    """Solve one stage given the next stage's solution.

    Concavifies the tie-broken principal objective and reads both
    players' vertex values and the receiver's actions off the vertices.
    """
    spec._check_stage(stage)
    if stage < spec.horizon and next_solution is None:
        raise ValueError(f"stage {stage} needs the stage-{stage + 1} solution")
    if next_solution is not None and next_solution.stage != stage + 1:
        raise ValueError(
            f"expected the stage-{stage + 1} solution, got stage {next_solution.stage}"
        )
    objective = _build_objective(spec, stage, next_solution)

    def psi(points):
        return objective.tie_broken_values(points, tie_tol)[0]

    envelope = argcav(psi, objective.arrangement)
    tri = envelope.triangulation
    q_a, q_b = objective.q_many(tri.vertices)
    actions = []
    values_b = np.empty(tri.n_vertices)
    for i in range(tri.n_vertices):
        _, top_b, psi_i, action = receiver_best(q_a[i], q_b[i], tie_tol)
        actions.append(action)
        values_b[i] = top_b
        if abs(psi_i - envelope.values[i]) > 1e-7:
            raise RuntimeError(
                f"stage {stage}: envelope value diverges from the stage objective "
                f"at vertex {i} ({envelope.values[i]!r} vs {psi_i!r})"
            )
    return StageSolution(
        stage=stage,
        triangulation=tri,
        values_principal=envelope.values,
        values_receiver=values_b,
        vertex_actions=tuple(actions),
        objective=objective,
    )


def solve(spec: GameSpec, tie_tol: float = EPS_TIE) -> EquilibriumSolution:
    """Backward induction over all stages.

    Raises SpecValidationError when the specification fails its
    numeric invariants.
    """
    ok, problems = validate_spec(spec)
    if not ok:
        raise SpecValidationError(problems)
    solved: list[StageSolution] = []
    nxt: StageSolution | None = None
    for t in range(spec.horizon, 0, -1):
        nxt = stage_backup(spec, t, nxt, tie_tol)
        solved.append(nxt)
    return EquilibriumSolution(spec=spec, stages=tuple(reversed(solved)))
