"""Deterministic mean-field iteration of the cascade recursion.

Each network is reduced to aggregates: failed fraction f, expected
survivors N, the pool of extra load F emitted by the nodes that just
failed, and the cumulative per-survivor extra load Q. One step:

    f_t  = 1 - (1 - p) * P[S >= Q_{t-1}]
    N_t  = (1 - f_t) * N
    F_t  = N * (f_t - f_{t-1}) * (E[L] + Q_{t-1})
    dQ_t = (sum of inbound coupled pools) / N_t
    Q_t  = Q_{t-1} + dQ_t

Load aimed at a network with no survivors is not lost: it is held for one
step and then forwarded through that network's coupling row, renormalized
over the networks that still have survivors (mirroring the node-level
simulation). Iteration stops when every network's survivor count changes by
less than one node and no held load remains in flight, or when every
network is empty (breakdown).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

from .core import AttackSpec, CouplingMatrix, NetworkConfig, validate_coupling
from .distributions import dist_mean, dist_sf_geq
from .strategies import CouplingDecision, CouplingStrategy, NetView, decide

DEFAULT_MAX_STEPS = 100_000


class MeanFieldError(ValueError):
    pass


@dataclass(frozen=True)
class MeanFieldState:
    t: int
    f: tuple[float, ...]
    n_alive: tuple[float, ...]
    total_extra: tuple[float, ...]
    q_step: tuple[float, ...]
    q_cum: tuple[float, ...]


class Outcome(enum.Enum):
    NO_CASCADE = "no_cascade"
    SURVIVED = "survived"
    BREAKDOWN = "breakdown"
    NON_CONVERGED = "non_converged"


class InitiationCase(enum.Enum):
    CASE1 = 1  # no network triggered
    CASE2 = 2  # exactly one side triggered
    CASE3 = 3  # all networks triggered


@dataclass(frozen=True)
class MeanFieldTrajectory:
    steps: list[MeanFieldState]
    outcome: Outcome
    final_fractions: tuple[float, ...]
    steps_taken: int

    @property
    def final(self) -> MeanFieldState:
        return self.steps[-1]

    def surviving_portion(self, node_counts: tuple[int, ...]) -> float:
        """Surviving nodes across the whole system over total initial nodes."""
        total = sum(node_counts)
        return sum(n for n in self.final.n_alive) / total


def _inbound(pools: list[float], coupling: CouplingMatrix, k: int) -> float:
    return sum(pools[i] * coupling.entry(i, k) for i in range(coupling.n))


def _routed_inbound(pools: list[float], coupling: CouplingMatrix,
                    live: list[bool]) -> list[float]:
    """Inbound totals; a pool emitted by an empty network follows its row
    renormalized over networks that still have survivors."""
    n = len(pools)
    recv = [0.0] * n
    for i in range(n):
        if pools[i] <= 0.0:
            continue
        row = [coupling.entry(i, k) for k in range(n)]
        if not live[i]:
            mass = sum(row[k] for k in range(n) if live[k])
            if mass > 0.0:
                row = [row[k] / mass if live[k] else 0.0 for k in range(n)]
            else:
                alive_total = sum(live)
                if alive_total == 0:
                    continue  # nothing left anywhere; caller declares breakdown
                row = [1.0 / alive_total if live[k] else 0.0 for k in range(n)]
        for k in range(n):
            recv[k] += pools[i] * row[k]
    return recv


def mf_init(cfgs: list[NetworkConfig], attack: AttackSpec,
            coupling: CouplingMatrix) -> MeanFieldState:
    """State right after the initial attack and its first redistribution."""
    n = len(cfgs)
    if len(attack.p) != n:
        raise MeanFieldError(f"attack has {len(attack.p)} entries for {n} networks")
    validate_coupling(coupling)
    if coupling.n != n:
        raise MeanFieldError("coupling matrix size does not match network count")

    f0 = list(attack.p)
    n0 = [(1.0 - p) * c.node_count for p, c in zip(f0, cfgs)]
    pool0 = [c.node_count * p * dist_mean(c.load_dist) for p, c in zip(f0, cfgs)]
    q0 = []
    for k in range(n):
        recv = _inbound(pool0, coupling, k)
        if n0[k] <= 0.0:
            q0.append(math.inf if recv > 0.0 else 0.0)
        else:
            q0.append(recv / n0[k])
    return MeanFieldState(0, tuple(f0), tuple(n0), tuple(pool0), tuple(q0), tuple(q0))


def mf_classify_initiation(state0: MeanFieldState,
                           space_min: tuple[float, ...]) -> tuple[InitiationCase, tuple[int, ...]]:
    """Which networks the initial redistribution triggers.

    Returns the case plus the indices of the triggered networks (empty for
    case 1, all for case 3).
    """
    if state0.t != 0:
        raise MeanFieldError("initiation classification needs a t=0 state")
    triggered = tuple(i for i, (q, s) in enumerate(zip(state0.q_cum, space_min)) if q >= s)
    if not triggered:
        return InitiationCase.CASE1, triggered
    if len(triggered) == len(state0.q_cum):
        return InitiationCase.CASE3, triggered
    return InitiationCase.CASE2, triggered


def _failure_phase(prev: MeanFieldState, cfgs: list[NetworkConfig],
                   attack: AttackSpec) -> tuple[list[float], list[float], list[float]]:
    """(f_t, N_t, F_t) implied by the load placed through step t-1.

    For a network that already had no survivors, prev.total_extra holds load
    that landed on it last step and is still in flight; it joins this step's
    pool so the coupling phase can forward it.
    """
    f, n_alive, pools = [], [], []
    for i, cfg in enumerate(cfgs):
        surv = (1.0 - attack.p[i]) * dist_sf_geq(cfg.space_dist, prev.q_cum[i])
        fi = 1.0 - surv
        newly = max(fi - prev.f[i], 0.0)
        load = dist_mean(cfg.load_dist) + (prev.q_cum[i] if math.isfinite(prev.q_cum[i]) else 0.0)
        pool = cfg.node_count * newly * load
        if prev.n_alive[i] < 1.0:
            pool += prev.total_extra[i]
        f.append(fi)
        n_alive.append(surv * cfg.node_count)
        pools.append(pool)
    return f, n_alive, pools


def _coupling_phase(prev: MeanFieldState, t: int, f, n_alive, pools,
                    coupling: CouplingMatrix) -> MeanFieldState:
    """Route this step's pools. An empty network keeps what lands on it in
    its pool slot (forwarded next step); its per-survivor increment is the
    +inf sentinel."""
    n = len(f)
    live = [na >= 1.0 for na in n_alive]
    recv = _routed_inbound(pools, coupling, live)
    q_step, q_cum, held = [], [], []
    for k in range(n):
        if live[k]:
            dq = recv[k] / n_alive[k]
            held.append(pools[k])
        else:
            dq = math.inf if recv[k] > 0.0 else 0.0
            held.append(recv[k])
        q_step.append(dq)
        q_cum.append(prev.q_cum[k] + dq)
    return MeanFieldState(t, tuple(f), tuple(n_alive), tuple(held),
                          tuple(q_step), tuple(q_cum))


def mf_step(prev: MeanFieldState, prev2_qcum: tuple[float, ...],
            coupling: CouplingMatrix, cfgs: list[NetworkConfig],
            attack: AttackSpec) -> MeanFieldState:
    """One recursion step. prev2_qcum (Q at t-2, zeros at t=1) parameterizes
    the failure window [Q_{t-2}, Q_{t-1}]; the pool is computed through the
    algebraically identical difference f_t - f_{t-1}."""
    del prev2_qcum  # window start is implicit in prev.f
    f, n_alive, pools = _failure_phase(prev, cfgs, attack)
    return _coupling_phase(prev, prev.t + 1, f, n_alive, pools, coupling)


def _views(f, n_alive, pools, q_cum, q_step, cfgs, attack) -> list[NetView]:
    return [
        NetView(
            n_alive=n_alive[i], pool=pools[i], q_cum=q_cum[i], q_step=q_step[i],
            frac_failed=f[i], attack_frac=attack.p[i], node_count=cfgs[i].node_count,
            load_mean=dist_mean(cfgs[i].load_dist), space_dist=cfgs[i].space_dist,
        )
        for i in range(len(cfgs))
    ]


def _check_monotone(prev: MeanFieldState, cur: MeanFieldState) -> None:
    for i in range(len(cur.f)):
        if cur.f[i] < prev.f[i] - 1e-12:
            raise MeanFieldError(f"failed fraction decreased for network {i} at t={cur.t}")
        if cur.q_cum[i] < prev.q_cum[i] - 1e-12:
            raise MeanFieldError(f"cumulative load decreased for network {i} at t={cur.t}")


def mf_run(cfgs: list[NetworkConfig], attack: AttackSpec,
           strategy: CouplingStrategy, max_steps: int = DEFAULT_MAX_STEPS,
           record_decisions: bool = False,
           ) -> MeanFieldTrajectory | tuple[MeanFieldTrajectory, list[CouplingDecision]]:
    """Iterate to a fixed point, asking the strategy for a fresh coupling
    matrix each step (after failures are known, before the load lands)."""
    if max_steps < 1:
        raise MeanFieldError("max_steps must be >= 1")
    n = len(cfgs)
    if len(attack.p) != n:
        raise MeanFieldError(f"attack has {len(attack.p)} entries for {n} networks")

    f0 = list(attack.p)
    n0 = [(1.0 - p) * c.node_count for p, c in zip(f0, cfgs)]
    pool0 = [c.node_count * p * dist_mean(c.load_dist) for p, c in zip(f0, cfgs)]
    decisions: list[CouplingDecision] = []

    def finish(steps, outcome, taken):
        final = steps[-1]
        fractions = tuple(1.0 - fi for fi in final.f)
        traj = MeanFieldTrajectory(steps, outcome, fractions, taken)
        return (traj, decisions) if record_decisions else traj

    base = MeanFieldState(0, tuple(f0), tuple(n0), tuple(pool0),
                          (0.0,) * n, (0.0,) * n)
    if all(na < 1.0 for na in n0):
        return finish([base], Outcome.BREAKDOWN, 0)

    dec0 = decide(strategy, _views(f0, n0, pool0, [0.0] * n, [0.0] * n, cfgs, attack), 0)
    decisions.append(dec0)
    state = _coupling_phase(base, 0, f0, n0, pool0, dec0.matrix)
    steps = [state]

    for t in range(1, max_steps + 1):
        f, n_alive, pools = _failure_phase(state, cfgs, attack)
        if all(na < 1.0 for na in n_alive):
            terminal = MeanFieldState(t, tuple(f), tuple(n_alive), tuple(pools),
                                      (0.0,) * n, state.q_cum)
            steps.append(terminal)
            return finish(steps, Outcome.BREAKDOWN, t)
        dec = decide(strategy, _views(f, n_alive, pools, state.q_cum,
                                      state.q_step, cfgs, attack), t)
        decisions.append(dec)
        new = _coupling_phase(state, t, f, n_alive, pools, dec.matrix)
        _check_monotone(state, new)
        converged = all(abs(new.n_alive[i] - state.n_alive[i]) < 1.0 for i in range(n))
        # Held load on an empty network moves next step; don't stop while
        # more than one node's worth is still in flight.
        converged = converged and all(
            new.total_extra[i] < dist_mean(cfgs[i].load_dist)
            for i in range(n) if new.n_alive[i] < 1.0
        )
        steps.append(new)
        state = new
        if converged:
            no_new_failures = all(new.f[i] <= attack.p[i] + 1e-15 for i in range(n))
            outcome = Outcome.NO_CASCADE if no_new_failures else Outcome.SURVIVED
            return finish(steps, outcome, t)
    return finish(steps, Outcome.NON_CONVERGED, max_steps)


def rkg_identical_step(q_prev: float, m: int, load_dist, space_dist,
                       q_prev2: float = 0.0) -> float:
    """One step of the random-key-graph recursion with identical groups.

    q_next = q_prev + E[(L + m*q_prev) * 1[m*q_prev2 < S <= m*q_prev]]
                      / (m * P[S >= m*q_prev])

    With the default q_prev2 = 0 the window starts at the bottom of the
    support; passing the previous value iterates the trajectory.
    """
    if m < 1:
        raise MeanFieldError("key-ring size m must be >= 1")
    surv = dist_sf_geq(space_dist, m * q_prev)
    window = dist_sf_geq(space_dist, m * q_prev2) - surv
    if window <= 0.0:
        return q_prev
    if surv <= 0.0:
        raise MeanFieldError("no surviving probability mass: breakdown")
    numer = (dist_mean(load_dist) + m * q_prev) * window
    return q_prev + numer / (m * surv)


def rkg_run(p: float, m: int, load_dist, space_dist,
            max_steps: int = DEFAULT_MAX_STEPS,
            tol: float = 1e-12) -> tuple[list[float], float]:
    """Iterate the identical-group recursion from the initial attack.

    Returns the q trajectory and the surviving portion (1-p) * P[S >= m*q*]
    at the fixed point.
    """
    if not (0.0 <= p < 1.0):
        raise MeanFieldError("attack fraction must be in [0, 1)")
    q = dist_mean(load_dist) / m * p / (1.0 - p)
    qs = [q]
    q_prev2 = 0.0
    for _ in range(max_steps):
        try:
            q_next = rkg_identical_step(q, m, load_dist, space_dist, q_prev2)
        except MeanFieldError:
            return qs, 0.0
        q_prev2, q = q, q_next
        qs.append(q)
        if q - q_prev2 <= tol * max(q, 1.0):
            break
    return qs, (1.0 - p) * dist_sf_geq(space_dist, m * q)


def trajectory_to_csv(traj: MeanFieldTrajectory, path: str) -> None:
    """Columns: t, network, f, n_alive, F, Q_step, Q_cum."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "network", "f", "n_alive", "F", "Q_step", "Q_cum"])
        for st in traj.steps:
            for i in range(len(st.f)):
                w.writerow([st.t, i, repr(st.f[i]), repr(st.n_alive[i]),
                            repr(st.total_extra[i]), repr(st.q_step[i]),
                            repr(st.q_cum[i])])
