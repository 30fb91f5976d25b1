"""Forward verification of a solved game.

Three independent routes confirm the backward-induction values:

* exact evaluation walks the reachable belief DAG (the principal's
  splits always land on triangulation vertices, so the DAG is finite)
  and accumulates expected payoffs exactly;
* Monte Carlo simulation plays the policies on sampled state paths
  with one child RNG stream per trajectory;
* one-shot deviation checks probe both players: the receiver against
  every alternative action at vertices and probe beliefs, the
  principal against sampled alternative experiments at reachable and
  random beliefs.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .geometry import EPS_GEOM, as_simplex_point, barycentric_indices
from .solver import EquilibriumSolution, receiver_best

__all__ = [
    "BeliefEdge",
    "BeliefNode",
    "NodeBudgetExceeded",
    "SimulationReport",
    "DeviationReport",
    "reachable_tree",
    "exact_value",
    "simulate",
    "one_shot_deviation_check",
]


class NodeBudgetExceeded(RuntimeError):
    """The reachable belief DAG outgrew the node budget."""

    def __init__(self, nodes: int, stage: int):
        self.nodes = nodes
        self.stage = stage
        super().__init__(
            f"reachable belief DAG exceeded {nodes} nodes while expanding stage {stage}"
        )


@dataclass(eq=False)
class BeliefEdge:
    """One experiment message out of a belief node."""

    label: int
    probability: float
    posterior: np.ndarray
    action: int
    reward_principal: float
    reward_receiver: float
    child: "BeliefNode | None"


@dataclass(eq=False)
class BeliefNode:
    """Pre-experiment belief of the principal at some stage."""

    stage: int
    belief: np.ndarray
    edges: list[BeliefEdge] = field(default_factory=list)
    value_principal: float = 0.0
    value_receiver: float = 0.0
    reach_probability: float = 0.0


def _belief_key(stage: int, coords: np.ndarray) -> tuple:
    return (stage, tuple(np.round(coords, 9) + 0.0))


def reachable_tree(solution: EquilibriumSolution, node_cap: int = 1_000_000) -> BeliefNode:
    """Reachable belief DAG under the equilibrium policies.

    Nodes are memoized on (stage, belief rounded to 9 decimals), so
    recombining paths share children.  Values are exact expectations;
    reach_probability accumulates over all paths into a node.  Raises
    NodeBudgetExceeded past node_cap nodes.
    """
    spec = solution.spec
    memo: dict[tuple, BeliefNode] = {}

    def build(stage: int, coords: np.ndarray) -> BeliefNode:
        key = _belief_key(stage, coords)
        node = memo.get(key)
        if node is not None:
            return node
        if len(memo) >= node_cap:
            raise NodeBudgetExceeded(len(memo), stage)
        node = BeliefNode(stage=stage, belief=np.asarray(coords, dtype=float))
        memo[key] = node
        st = solution.stage(stage)
        ids, weights = barycentric_indices(st.triangulation, coords)
        for label, w in zip(ids, weights):
            vertex = st.triangulation.vertices[label]
            action = st.vertex_actions[label]
            r_a = float(vertex @ spec.rewards_principal[stage - 1][:, action])
            r_b = float(vertex @ spec.rewards_receiver[stage - 1][:, action])
            child = None
            total_a, total_b = r_a, r_b
            if stage < spec.horizon and not spec.is_terminating(stage, action):
                child = build(stage + 1, vertex @ spec.kernels[stage - 1][:, action, :])
                total_a += child.value_principal
                total_b += child.value_receiver
            node.edges.append(
                BeliefEdge(int(label), float(w), vertex, int(action), r_a, r_b, child)
            )
            node.value_principal += w * total_a
            node.value_receiver += w * total_b
        return node

    root = build(1, as_simplex_point(spec.prior))
    root.reach_probability = 1.0
    for node in sorted(memo.values(), key=lambda nd: nd.stage):
        for edge in node.edges:
            if edge.child is not None:
                edge.child.reach_probability += node.reach_probability * edge.probability
    return root


def exact_value(solution: EquilibriumSolution, node_cap: int = 1_000_000) -> tuple[float, float]:
    """Exact expected payoffs (principal, receiver) under the equilibrium."""
    root = reachable_tree(solution, node_cap)
    return root.value_principal, root.value_receiver


@dataclass(frozen=True)
class SimulationReport:
    """Monte Carlo summary: sample means with standard errors."""

    trajectories: int
    seed: int
    mean_principal: float
    mean_receiver: float
    stderr_principal: float
    stderr_receiver: float


@dataclass(eq=False)
class _NodePlan:
    """Sampling tables for one belief node: cumulative message rows per
    state, then per message the realized reward columns and either a
    terminal marker or the next-state tables plus the child plan."""

    message_cum: list[tuple[float, ...]]
    entries: list[tuple]


def simulate(
    solution: EquilibriumSolution,
    seed: int = 0,
    trajectories: int = 100_000,
    node_cap: int = 1_000_000,
) -> SimulationReport:
    """Play the equilibrium policies on sampled state trajectories.

    Each trajectory draws from its own child stream of
    SeedSequence(seed), so results are reproducible and independent of
    scheduling.  Rewards are realized (true-state) stage rewards.
    Sampling tables are precomputed on the reachable belief DAG, so
    the same node_cap resource limit applies.
    """
    if trajectories < 2:
        raise ValueError("need at least 2 trajectories for a standard error")
    spec = solution.spec
    root = reachable_tree(solution, node_cap)
    plans: dict[int, _NodePlan] = {}

    def plan_for(node: BeliefNode) -> _NodePlan:
        plan = plans.get(id(node))
        if plan is not None:
            return plan
        pi = node.belief
        n = pi.size
        weights = np.array([e.probability for e in node.edges])
        atoms = np.array([e.posterior for e in node.edges])
        kernel = np.empty((n, len(node.edges)))
        for x in range(n):
            if pi[x] > EPS_GEOM:
                kernel[x] = weights * atoms[:, x] / pi[x]
            else:
                kernel[x] = 1.0 / len(node.edges)
        kernel = np.clip(kernel, 0.0, None)
        kernel /= kernel.sum(axis=1, keepdims=True)
        plan = _NodePlan([tuple(np.cumsum(kernel[x])) for x in range(n)], [])
        plans[id(node)] = plan
        for edge in node.edges:
            rew_a = tuple(spec.rewards_principal[node.stage - 1][:, edge.action])
            rew_b = tuple(spec.rewards_receiver[node.stage - 1][:, edge.action])
            if edge.child is None:
                plan.entries.append((rew_a, rew_b, None, None))
            else:
                trans = spec.kernels[node.stage - 1][:, edge.action, :]
                trans_cum = [tuple(np.cumsum(trans[x])) for x in range(n)]
                plan.entries.append((rew_a, rew_b, trans_cum, plan_for(edge.child)))
        return plan

    root_plan = plan_for(root)
    prior_cum = tuple(np.cumsum(as_simplex_point(spec.prior)))
    streams = np.random.SeedSequence(seed).spawn(trajectories)
    totals_a = np.empty(trajectories)
    totals_b = np.empty(trajectories)
    draws_per_traj = 1 + 2 * spec.horizon
    for i in range(trajectories):
        rng = np.random.default_rng(streams[i])
        draws = rng.random(draws_per_traj)
        cursor = 0
        x = bisect.bisect_right(prior_cum, draws[cursor])
        cursor += 1
        if x >= len(prior_cum):
            x = len(prior_cum) - 1
        plan = root_plan
        acc_a = acc_b = 0.0
        while True:
            m = bisect.bisect_right(plan.message_cum[x], draws[cursor])
            cursor += 1
            if m >= len(plan.entries):
                m = len(plan.entries) - 1
            rew_a, rew_b, trans_cum, child = plan.entries[m]
            acc_a += rew_a[x]
            acc_b += rew_b[x]
            if child is None:
                break
            x = bisect.bisect_right(trans_cum[x], draws[cursor])
            cursor += 1
            if x >= len(rew_a):
                x = len(rew_a) - 1
            plan = child
        totals_a[i] = acc_a
        totals_b[i] = acc_b
    return SimulationReport(
        trajectories=trajectories,
        seed=seed,
        mean_principal=float(totals_a.mean()),
        mean_receiver=float(totals_b.mean()),
        stderr_principal=float(totals_a.std(ddof=1) / np.sqrt(trajectories)),
        stderr_receiver=float(totals_b.std(ddof=1) / np.sqrt(trajectories)),
    )


@dataclass(frozen=True, eq=False)
class DeviationReport:
    """Outcome of the one-shot deviation probes."""

    receiver_checked: int
    principal_checked: int
    max_receiver_gain: float
    max_principal_gain: float
    violations: tuple[dict, ...]

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def one_shot_deviation_check(
    solution: EquilibriumSolution,
    probes_per_stage: int = 20,
    experiments_per_belief: int = 20,
    seed: int = 0,
    tol: float = 1e-9,
    node_cap: int = 1_000_000,
) -> DeviationReport:
    """Search for profitable one-shot deviations by either player.

    Receiver: at every triangulation vertex, every reachable belief,
    and every random probe belief, the prescribed action must attain
    the best action value; at vertices the stored stage value must
    equal it (Bellman consistency).  Principal: at every reachable
    belief and probe, no sampled alternative experiment
    (mean-preserving split, full revelation, or no split) may beat the
    stage value.  Gains above tol are reported as violations.
    """
    spec = solution.spec
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    violations: list[dict] = []
    receiver_checked = 0
    principal_checked = 0
    max_gain_r = 0.0
    max_gain_p = 0.0

    reachable: dict[int, list[np.ndarray]] = {t: [] for t in range(1, spec.horizon + 1)}
    root = reachable_tree(solution, node_cap)
    seen: set[int] = set()
    frontier = [root]
    while frontier:
        node = frontier.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        reachable[node.stage].append(node.belief)
        frontier.extend(e.child for e in node.edges if e.child is not None)

    for t in range(1, spec.horizon + 1):
        st = solution.stage(t)
        tri = st.triangulation
        n = spec.n_states(t)
        q_a, q_b = st.objective.q_many(tri.vertices)
        for i in range(tri.n_vertices):
            receiver_checked += 1
            stored = st.vertex_actions[i]
            gain = float(q_b[i].max() - q_b[i, stored])
            max_gain_r = max(max_gain_r, gain)
            if gain > tol:
                violations.append(
                    {
                        "kind": "receiver_action",
                        "stage": t,
                        "belief": tri.vertices[i].tolist(),
                        "gain": gain,
                    }
                )
            bellman_gap = abs(float(st.values_receiver[i]) - float(q_b[i].max()))
            if bellman_gap > tol:
                violations.append(
                    {
                        "kind": "receiver_bellman",
                        "stage": t,
                        "belief": tri.vertices[i].tolist(),
                        "gain": bellman_gap,
                    }
                )

        probes = np.vstack(
            reachable[t] + [rng.dirichlet(np.ones(n), size=probes_per_stage)]
        )
        qp_a, qp_b = st.objective.q_many(probes)
        psi_probes, _ = st.objective.tie_broken_values(probes)
        v_probes = st.interp_principal.evaluate_many(probes)
        for j in range(probes.shape[0]):
            pi = probes[j]
            receiver_checked += 1
            chosen = receiver_best(qp_a[j], qp_b[j])[3]
            gain = float(qp_b[j].max() - qp_b[j, chosen])
            max_gain_r = max(max_gain_r, gain)
            if gain > tol:
                violations.append(
                    {
                        "kind": "receiver_action",
                        "stage": t,
                        "belief": pi.tolist(),
                        "gain": gain,
                    }
                )
            principal_checked += 1
            null_gain = float(psi_probes[j] - v_probes[j])
            max_gain_p = max(max_gain_p, null_gain)
            if null_gain > tol:
                violations.append(
                    {
                        "kind": "principal_null_split",
                        "stage": t,
                        "belief": pi.tolist(),
                        "gain": null_gain,
                    }
                )
            measures = _sample_inducible(rng, pi, experiments_per_belief)
            for atoms, weights in measures:
                principal_checked += 1
                dev_vals, _ = st.objective.tie_broken_values(atoms)
                gain = float(weights @ dev_vals - v_probes[j])
                max_gain_p = max(max_gain_p, gain)
                if gain > tol:
                    violations.append(
                        {
                            "kind": "principal_experiment",
                            "stage": t,
                            "belief": pi.tolist(),
                            "gain": gain,
                        }
                    )

    return DeviationReport(
        receiver_checked=receiver_checked,
        principal_checked=principal_checked,
        max_receiver_gain=max_gain_r,
        max_principal_gain=max_gain_p,
        violations=tuple(violations),
    )


def _sample_inducible(rng: np.random.Generator, pi: np.ndarray, count: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Random mean-pi distributions over posteriors, plus full revelation.

    Random draws are recentered and shrunk toward pi so the mean is
    preserved exactly and all atoms stay in the simplex.
    """
    n = pi.size
    out: list[tuple[np.ndarray, np.ndarray]] = []
    support = pi > EPS_GEOM
    if support.sum() > 1:
        atoms = np.eye(n)[support]
        out.append((atoms, pi[support] / pi[support].sum()))
    for _ in range(count):
        k = int(rng.integers(2, n + 2))
        atoms = rng.dirichlet(np.ones(n), size=k)
        weights = rng.dirichlet(np.ones(k))
        mean = weights @ atoms
        delta = atoms - mean
        shrink = 1.0
        for x in range(n):
            worst = delta[:, x].min()
            if worst < -EPS_GEOM:
                shrink = min(shrink, pi[x] / -worst)
        if shrink <= 0.0:
            continue
        shifted = np.clip(pi + shrink * delta, 0.0, None)
        shifted /= shifted.sum(axis=1, keepdims=True)
        out.append((shifted, weights))
    return out
