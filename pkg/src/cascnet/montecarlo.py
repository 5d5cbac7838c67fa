"""Node-level stochastic cascade simulation.

Two redistribution modes:

* complete: every network is fully connected, so a step's inbound load is
  shared equally by all survivors of the receiving network. Survivors of a
  network always carry the same cumulative extra load, which keeps state
  per network down to one scalar.
* local: load moves along edges. A dead node's in-net share splits equally
  over its live neighbors (all live nodes of the network when it has none);
  the out-net share goes to the identically indexed node in the other
  network plus that node's live neighbors (all live nodes of the other
  network when the whole group is dead).

Deaths are evaluated simultaneously after all shares of a step are placed,
and a node fails when its received load strictly exceeds its free space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (AttackSpec, BarabasiAlbert, Complete, CouplingMatrix,
                   EdgeListTopology, ErdosRenyi, NetworkConfig, Topology)
from .distributions import dist_mean, dist_sample
from .meanfield import MeanFieldState
from .strategies import CouplingStrategy, NetView, decide

DEFAULT_MAX_STEPS = 1_000_000


class SimulationError(RuntimeError):
    pass


@dataclass
class Graph:
    """Undirected adjacency in CSR form."""
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def node_count(self) -> int:
        return self.indptr.size - 1

    @property
    def edge_count(self) -> int:
        return self.indices.size // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]


@dataclass
class NodePopulation:
    load: np.ndarray
    space: np.ndarray
    alive: np.ndarray
    received: np.ndarray
    graph: Graph | None = None  # None: fully connected

    @property
    def capacity(self) -> np.ndarray:
        return self.load + self.space

    @property
    def alive_count(self) -> int:
        return int(np.count_nonzero(self.alive))


@dataclass(frozen=True)
class SimOutcome:
    final_fractions: tuple[float, ...]
    steps: int
    breakdown: bool
    non_converged: bool = False
    trajectory: list[MeanFieldState] | None = None


# ---------------------------------------------------------------------------
# Graph generation
# ---------------------------------------------------------------------------

def _edges_to_csr(node_count: int, u: np.ndarray, v: np.ndarray) -> Graph:
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    order = np.argsort(src, kind="stable")
    src, dst = src[order], dst[order]
    indptr = np.zeros(node_count + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(indptr, dst.astype(np.int64))


def _pair_from_index(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the row-major upper-triangle linearization of node pairs."""
    kf = k.astype(np.float64)
    i = np.floor((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8.0 * kf)) / 2.0).astype(np.int64)
    # Guard against sqrt rounding at row boundaries.
    for _ in range(2):
        off = i * (2 * n - i - 1) // 2
        i = np.where(off > k, i - 1, i)
        off = i * (2 * n - i - 1) // 2
        nxt = (i + 1) * (2 * n - i - 2) // 2
        i = np.where(k >= nxt, i + 1, i)
    off = i * (2 * n - i - 1) // 2
    j = k - off + i + 1
    return i, j


def _erdos_renyi(node_count: int, mean_degree: float, rng: np.random.Generator) -> Graph:
    total_pairs = node_count * (node_count - 1) // 2
    p = mean_degree / (node_count - 1)
    m = int(rng.binomial(total_pairs, p))
    picked = np.empty(0, dtype=np.int64)
    while picked.size < m:
        need = m - picked.size
        extra = rng.integers(0, total_pairs, size=int(need * 1.2) + 16, dtype=np.int64)
        picked = np.unique(np.concatenate([picked, extra]))
    if picked.size > m:
        picked = rng.permutation(picked)[:m]
    u, v = _pair_from_index(picked, node_count)
    return _edges_to_csr(node_count, u, v)


def _barabasi_albert(node_count: int, mean_degree: float, rng: np.random.Generator) -> Graph:
    m = max(1, math.ceil(mean_degree / 2.0))
    m0 = m + 1
    if node_count <= m0:
        raise SimulationError("node_count too small for the requested mean degree")
    clique_u, clique_v = np.triu_indices(m0, k=1)
    n_clique = clique_u.size
    total_edges = n_clique + (node_count - m0) * m
    us = np.empty(total_edges, dtype=np.int64)
    vs = np.empty(total_edges, dtype=np.int64)
    us[:n_clique], vs[:n_clique] = clique_u, clique_v
    # Endpoint list: sampling from it is degree-proportional attachment.
    endpoints = np.empty(2 * total_edges, dtype=np.int64)
    endpoints[0:2 * n_clique:2] = clique_u
    endpoints[1:2 * n_clique:2] = clique_v
    fill = 2 * n_clique
    e = n_clique
    for v in range(m0, node_count):
        targets: set[int] = set()
        while len(targets) < m:
            cand = endpoints[rng.integers(0, fill, size=m - len(targets))]
            targets.update(int(c) for c in cand)
        for t in targets:
            us[e], vs[e] = v, t
            endpoints[fill] = v
            endpoints[fill + 1] = t
            fill += 2
            e += 1
    return _edges_to_csr(node_count, us, vs)


def generate_graph(topology: Topology, node_count: int, seed: int) -> Graph | None:
    """Deterministic adjacency for a topology; None means fully connected."""
    if isinstance(topology, Complete):
        return None
    rng = np.random.default_rng(seed)
    if isinstance(topology, ErdosRenyi):
        return _erdos_renyi(node_count, topology.mean_degree, rng)
    if isinstance(topology, BarabasiAlbert):
        return _barabasi_albert(node_count, topology.mean_degree, rng)
    if isinstance(topology, EdgeListTopology):
        return read_edge_list(topology.path, node_count)
    raise SimulationError(f"unknown topology {topology!r}")


def write_edge_list(graph: Graph, path: str) -> None:
    """One "u v" pair per line, each undirected edge once."""
    with open(path, "w") as fh:
        for u in range(graph.node_count):
            for v in graph.neighbors(u):
                if u < v:
                    fh.write(f"{u} {v}\n")


def read_edge_list(path: str, node_count: int) -> Graph:
    data = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if data.size == 0:
        return _edges_to_csr(node_count, np.empty(0, np.int64), np.empty(0, np.int64))
    return _edges_to_csr(node_count, data[:, 0], data[:, 1])


# ---------------------------------------------------------------------------
# Population setup
# ---------------------------------------------------------------------------

def sample_population(cfg: NetworkConfig, rng: np.random.Generator,
                      graph: Graph | None = None) -> NodePopulation:
    n = cfg.node_count
    load = dist_sample(cfg.load_dist, n, rng)
    space = dist_sample(cfg.space_dist, n, rng)
    if graph is None and not isinstance(cfg.topology, Complete):
        graph = generate_graph(cfg.topology, n, int(rng.integers(0, 2 ** 63 - 1)))
    return NodePopulation(load=load, space=space,
                          alive=np.ones(n, dtype=bool),
                          received=np.zeros(n), graph=graph)


def apply_attack(pop: NodePopulation, p: float, rng: np.random.Generator,
                 ) -> tuple[np.ndarray, float]:
    """Kill exactly round(p*N) uniformly random nodes.

    Returns (indices of killed nodes, their total load)."""
    if not (0.0 <= p <= 1.0):
        raise SimulationError(f"attack fraction must be in [0, 1], got {p}")
    n = pop.load.size
    k = int(round(p * n))
    victims = rng.choice(n, size=k, replace=False)
    pop.alive[victims] = False
    return victims, float(pop.load[victims].sum())


# ---------------------------------------------------------------------------
# Complete-graph (global equal redistribution) stepping
# ---------------------------------------------------------------------------

def _effective_inbound(pools: list[float], coupling: CouplingMatrix,
                       live: list[bool]) -> list[float]:
    """Inbound totals; a dead source network's pool is re-routed over live
    targets by renormalizing its coupling row."""
    n = len(pools)
    recv = [0.0] * n
    for i in range(n):
        if pools[i] < 0:
            raise SimulationError(f"negative pool for network {i}")
        if pools[i] == 0.0:
            continue
        row = [coupling.entry(i, k) for k in range(n)]
        if not live[i]:
            mass = sum(row[k] for k in range(n) if live[k])
            if mass <= 0.0:
                row = [1.0 if live[k] else 0.0 for k in range(n)]
                mass = sum(row)
                if mass == 0.0:
                    continue  # nothing alive anywhere; caller declares breakdown
            row = [row[k] / mass if live[k] else 0.0 for k in range(n)]
        for k in range(n):
            recv[k] += pools[i] * row[k]
    return recv


def mc_step_complete(pops: list[NodePopulation], pools: list[float],
                     coupling: CouplingMatrix) -> list[float]:
    """One synchronous redistribution step; mutates populations in place and
    returns the next-step pools."""
    live = [p.alive_count > 0 for p in pops]
    recv = _effective_inbound(pools, coupling, live)
    next_pools = [0.0] * len(pops)
    for k, pop in enumerate(pops):
        if not live[k]:
            next_pools[k] = recv[k]  # passes through next step
            continue
        if recv[k] == 0.0:
            continue
        count = pop.alive_count
        q_prev = pop.received[pop.alive][0] if count else 0.0
        inc = recv[k] / count
        q_new = q_prev + inc
        newly = pop.alive & (pop.space < q_new)
        pop.received[pop.alive] = q_new
        pop.alive &= ~newly
        n_dead = int(np.count_nonzero(newly))
        next_pools[k] = float(pop.load[newly].sum()) + n_dead * q_new
    return next_pools


# ---------------------------------------------------------------------------
# Local (topology-driven) stepping
# ---------------------------------------------------------------------------

def _flat_neighbors(graph: Graph, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated neighbor lists for `nodes`, plus the owner index of each."""
    starts = graph.indptr[nodes]
    lens = graph.indptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    owner = np.repeat(np.arange(nodes.size), lens)
    cum = np.cumsum(lens) - lens
    pos = np.arange(total) - cum[owner] + starts[owner]
    return graph.indices[pos], owner


def mc_step_local(pops: list[NodePopulation], newly_dead: list[np.ndarray],
                  coupling: CouplingMatrix) -> tuple[list[np.ndarray], list[float]]:
    """One topology-aware step. newly_dead holds, per network, the nodes that
    died in the previous step (their loads are being redistributed now).
    Returns (next newly-dead index arrays, their carried-load totals)."""
    n = len(pops)
    bufs = [np.zeros(p.load.size) for p in pops]
    loose = [0.0] * n  # shares falling back to network-wide redistribution

    for i in range(n):
        dead = newly_dead[i]
        if dead.size == 0:
            continue
        carried = pops[i].load[dead] + pops[i].received[dead]
        for j in range(n):
            frac = coupling.entry(i, j)
            if frac == 0.0:
                continue
            shares = carried * frac
            pop_j = pops[j]
            if i == j:
                if pop_j.graph is None:
                    loose[j] += float(shares.sum())
                    continue
                nbrs, owner = _flat_neighbors(pop_j.graph, dead)
                live = pop_j.alive[nbrs]
                counts = np.bincount(owner[live], minlength=dead.size)
                placeable = counts > 0
                per = np.zeros(dead.size)
                per[placeable] = shares[placeable] / counts[placeable]
                np.add.at(bufs[j], nbrs[live], per[owner[live]])
                loose[j] += float(shares[~placeable].sum())
            else:
                # Paired node (same index) plus its live neighbors.
                if pop_j.graph is None:
                    loose[j] += float(shares.sum())
                    continue
                paired_alive = pop_j.alive[dead]
                nbrs, owner = _flat_neighbors(pop_j.graph, dead)
                live = pop_j.alive[nbrs]
                counts = np.bincount(owner[live], minlength=dead.size).astype(float)
                counts += paired_alive
                placeable = counts > 0
                per = np.zeros(dead.size)
                per[placeable] = shares[placeable] / counts[placeable]
                np.add.at(bufs[j], nbrs[live], per[owner[live]])
                sel = paired_alive & placeable
                np.add.at(bufs[j], dead[sel], per[sel])
                loose[j] += float(shares[~placeable].sum())

    # Network-wide fallbacks; re-rope to the other side when a network is empty.
    live_counts = [p.alive_count for p in pops]
    stranded = 0.0
    for k in range(n):
        if loose[k] == 0.0:
            continue
        if live_counts[k] > 0:
            bufs[k][pops[k].alive] += loose[k] / live_counts[k]
        else:
            stranded += loose[k]
    if stranded > 0.0:
        total_live = sum(live_counts)
        if total_live == 0:
            pass  # breakdown; load has nowhere to go
        else:
            for k in range(n):
                if live_counts[k] > 0:
                    bufs[k][pops[k].alive] += stranded / total_live

    next_dead: list[np.ndarray] = []
    next_pools: list[float] = []
    for k, pop in enumerate(pops):
        pop.received += bufs[k]
        newly = pop.alive & (pop.received > pop.space)
        idx = np.nonzero(newly)[0]
        pop.alive[idx] = False
        next_dead.append(idx)
        next_pools.append(float((pop.load[idx] + pop.received[idx]).sum()))
    return next_dead, next_pools


# ---------------------------------------------------------------------------
# Full runs
# ---------------------------------------------------------------------------

def _empirical_views(cfgs: list[NetworkConfig], attack: AttackSpec,
                     pops: list[NodePopulation], pools: list[float]) -> list[NetView]:
    views = []
    for i, (cfg, pop) in enumerate(zip(cfgs, pops)):
        count = pop.alive_count
        q_cum = float(pop.received[pop.alive].mean()) if count else 0.0
        views.append(NetView(
            n_alive=float(count), pool=pools[i], q_cum=q_cum, q_step=0.0,
            frac_failed=1.0 - count / cfg.node_count, attack_frac=attack.p[i],
            node_count=cfg.node_count, load_mean=dist_mean(cfg.load_dist),
            space_dist=cfg.space_dist,
        ))
    return views


def _record(traj: list[MeanFieldState], t: int, cfgs, pops, pools) -> None:
    f, n_alive, q_cum = [], [], []
    for cfg, pop in zip(cfgs, pops):
        count = pop.alive_count
        f.append(1.0 - count / cfg.node_count)
        n_alive.append(float(count))
        q_cum.append(float(pop.received[pop.alive].mean()) if count else 0.0)
    prev_q = traj[-1].q_cum if traj else (0.0,) * len(cfgs)
    traj.append(MeanFieldState(t, tuple(f), tuple(n_alive), tuple(pools),
                               tuple(q - pq for q, pq in zip(q_cum, prev_q)),
                               tuple(q_cum)))


def mc_run(cfgs: list[NetworkConfig], attack: AttackSpec,
           strategy: CouplingStrategy, seed: int,
           record_trajectory: bool = False,
           max_steps: int = DEFAULT_MAX_STEPS,
           graphs: list[Graph | None] | None = None) -> SimOutcome:
    """Sample populations, apply the attack, and cascade to a fixed point.

    Deterministic for a given seed. Pre-generated adjacency can be passed
    through `graphs` (one entry per network, None for fully connected) so
    repeated runs skip regeneration. Stops when a step kills no nodes and
    leaves no outstanding pool, or when no node survives anywhere.
    """
    n = len(cfgs)
    if len(attack.p) != n:
        raise SimulationError(f"attack has {len(attack.p)} entries for {n} networks")
    rng = np.random.default_rng(seed)
    local_mode = any(not isinstance(c.topology, Complete) for c in cfgs)
    if local_mode and len({c.node_count for c in cfgs}) != 1:
        raise SimulationError("local redistribution requires equal node counts")

    if graphs is None:
        graphs = [None] * n
    pops = [sample_population(cfg, rng, graph=g) for cfg, g in zip(cfgs, graphs)]
    dead0, pools = [], []
    for pop, p in zip(pops, attack.p):
        victims, pool = apply_attack(pop, p, rng)
        dead0.append(np.sort(victims))
        pools.append(pool)

    trajectory: list[MeanFieldState] | None = [] if record_trajectory else None
    if record_trajectory:
        _record(trajectory, 0, cfgs, pops, pools)

    newly_dead = dead0
    t = 0
    while t < max_steps:
        if all(p.alive_count == 0 for p in pops):
            return SimOutcome(tuple(0.0 for _ in cfgs), t, True, trajectory=trajectory)
        if all(pool <= 0.0 for pool in pools):
            break
        decision = decide(strategy, _empirical_views(cfgs, attack, pops, pools), t)
        if local_mode:
            newly_dead, pools = mc_step_local(pops, newly_dead, decision.matrix)
        else:
            pools = mc_step_complete(pops, pools, decision.matrix)
        t += 1
        if record_trajectory:
            _record(trajectory, t, cfgs, pops, pools)

    fractions = tuple(p.alive_count / c.node_count for p, c in zip(pops, cfgs))
    breakdown = all(p.alive_count == 0 for p in pops)
    return SimOutcome(fractions, t, breakdown,
                      non_converged=(t >= max_steps and any(pl > 0 for pl in pools)),
                      trajectory=trajectory)
