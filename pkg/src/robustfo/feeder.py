"""Synthetic radial distribution feeder with photovoltaic inverters.

Voltages follow the LinDistFlow linearization: with the slack (PCC) bus held
at ``v0``, the voltage at bus ``i`` is::

    v_i = v0 + sum_j (R_ij p_j + X_ij q_j) / v0

where ``R_ij`` (``X_ij``) is the resistance (reactance) of the path shared by
buses ``i`` and ``j`` on their way to the PCC, and ``p_j``/``q_j`` are net
injections.  Each inverter ``i`` is controlled through
``u_i = [p_i - p_i^MPP, q_i]``, stacked inverter by inverter.
"""

from dataclasses import dataclass, replace

import networkx as nx
import numpy as np

from .errors import InvalidArgumentError, InvalidTopologyError, RankDeficientError
from .plant import SignalSchedule, StaticPlant

V_MAX = 1.1
V_MIN = 0.9
# size of the full-scale feeder the default 12-bus case stands in for
FULL_SCALE_CASE = {"buses": 56, "inverters": 25}


@dataclass(frozen=True)
class RadialFeeder:
    """Tree feeder; schedules are indexed ``[k, bus]`` / ``[k, inverter]`` in p.u."""

    n_b: int
    lines: tuple
    pcc: int
    pv_buses: tuple
    load_p: np.ndarray
    load_q: np.ndarray
    p_mpp: np.ndarray
    q_min: float
    q_max: float
    v0: float = 1.0

    def __post_init__(self):
        graph = self.graph()
        if graph.number_of_nodes() != self.n_b or not nx.is_tree(graph):
            raise InvalidTopologyError("lines must form a spanning tree over all buses")
        for _, _, r, x in self.lines:
            if not (r > 0 and x > 0):
                raise InvalidArgumentError("line resistance and reactance must be positive")
        if not 0 <= self.pcc < self.n_b:
            raise InvalidArgumentError(f"unknown PCC bus {self.pcc}")
        if any(not 0 <= b < self.n_b for b in self.pv_buses):
            raise InvalidArgumentError("PV bus index out of range")
        if self.q_min > self.q_max:
            raise InvalidArgumentError("q_min exceeds q_max")
        if np.any(np.asarray(self.p_mpp) < 0):
            raise InvalidArgumentError("maximum power points must be non-negative")
        K = np.shape(self.p_mpp)[0]
        if np.shape(self.load_p) != (K, self.n_b) or np.shape(self.load_q) != (K, self.n_b):
            raise InvalidArgumentError("load schedules must have shape (K, n_b)")
        if np.shape(self.p_mpp) != (K, len(self.pv_buses)):
            raise InvalidArgumentError("MPP schedule must have shape (K, n_pv)")

    def graph(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n_b))
        for a, b, r, x in self.lines:
            g.add_edge(a, b, r=r, x=x)
        return g

    @property
    def n_pv(self):
        return len(self.pv_buses)

    @property
    def horizon(self):
        return self.p_mpp.shape[0]

    def edge_set(self):
        return frozenset(frozenset((a, b)) for a, b, _, _ in self.lines)


def path_matrices(feeder):
    """Shared-path resistance and reactance matrices over all buses, over ``v0``.

    Row and column of the PCC are zero.
    """
    g = feeder.graph()
    if not nx.is_connected(g):
        raise InvalidTopologyError("feeder is disconnected")
    paths = nx.single_source_shortest_path(g, feeder.pcc)
    edges = {}
    for bus, path in paths.items():
        edges[bus] = {frozenset(e): (g.edges[e]["r"], g.edges[e]["x"])
                      for e in zip(path[:-1], path[1:])}
    n = feeder.n_b
    Rm = np.zeros((n, n))
    Xm = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            shared = edges[i].keys() & edges[j].keys()
            Rm[i, j] = Rm[j, i] = sum(edges[i][e][0] for e in shared)
            Xm[i, j] = Xm[j, i] = sum(edges[i][e][1] for e in shared)
    return Rm / feeder.v0, Xm / feeder.v0


def lindistflow_voltages(feeder, p_inj, q_inj, k, matrices=None):
    """Voltages at the PV buses for inverter injections at step ``k``."""
    p_inj = np.asarray(p_inj, dtype=float)
    q_inj = np.asarray(q_inj, dtype=float)
    if p_inj.shape != (feeder.n_pv,) or q_inj.shape != (feeder.n_pv,):
        raise InvalidArgumentError("injections must have one entry per inverter")
    Rm, Xm = path_matrices(feeder) if matrices is None else matrices
    p_net = -np.asarray(feeder.load_p[k], dtype=float).copy()
    q_net = -np.asarray(feeder.load_q[k], dtype=float).copy()
    pv = list(feeder.pv_buses)
    np.add.at(p_net, pv, p_inj)
    np.add.at(q_net, pv, q_inj)
    v = feeder.v0 + Rm @ p_net + Xm @ q_net
    return v[pv]


def sensitivity_matrix(feeder):
    """True ``dv/du`` with columns ordered ``[curt_1, q_1, curt_2, q_2, ...]``."""
    Rm, Xm = path_matrices(feeder)
    pv = list(feeder.pv_buses)
    H = np.empty((feeder.n_pv, 2 * feeder.n_pv))
    H[:, 0::2] = Rm[np.ix_(pv, pv)]
    H[:, 1::2] = Xm[np.ix_(pv, pv)]
    return H


def disturbance(feeder, k, matrices=None):
    """Voltages with every inverter at its MPP and zero reactive power."""
    return lindistflow_voltages(feeder, feeder.p_mpp[k], np.zeros(feeder.n_pv), k, matrices)


def disturbance_schedule(feeder):
    mats = path_matrices(feeder)
    return np.array([disturbance(feeder, k, mats) for k in range(feeder.horizon)])


def split_input(u):
    """``(curtailment, q)`` from the stacked input."""
    u = np.asarray(u)
    return u[..., 0::2], u[..., 1::2]


def input_box(feeder, k):
    """Bounds enforcing ``0 <= p_i <= p_i^MPP`` and ``q_min <= q_i <= q_max``."""
    lo = np.empty(2 * feeder.n_pv)
    hi = np.empty(2 * feeder.n_pv)
    lo[0::2] = -feeder.p_mpp[k]
    hi[0::2] = 0.0
    lo[1::2] = feeder.q_min
    hi[1::2] = feeder.q_max
    return lo, hi


def fit_sensitivity(U, V, return_offset=False):
    """Least-squares affine fit ``v ~ H_hat u + d_hat`` from sample rows.

    Raises
    ------
    RankDeficientError
        If the samples do not span an affine space of full input dimension.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if U.shape[0] != V.shape[0]:
        raise InvalidArgumentError("U and V need the same number of samples")
    design = np.hstack([U, np.ones((U.shape[0], 1))])
    coef, _, rank, _ = np.linalg.lstsq(design, V, rcond=None)
    if rank < design.shape[1]:
        raise RankDeficientError(
            f"design has rank {rank}, need {design.shape[1]} affinely independent samples")
    H_hat = coef[:-1].T
    return (H_hat, coef[-1]) if return_offset else H_hat


def historical_samples(feeder, n_samples, seed, noise=0.0):
    """Random admissible operating points across the horizon and their voltages.

    The loads and MPPs move with the sampled time step, so a constant-offset
    fit sees them as unexplained variation.
    """
    rng = np.random.default_rng(seed)
    mats = path_matrices(feeder)
    U = np.empty((n_samples, 2 * feeder.n_pv))
    V = np.empty((n_samples, feeder.n_pv))
    for s in range(n_samples):
        k = int(rng.integers(feeder.horizon))
        lo, hi = input_box(feeder, k)
        u = rng.uniform(lo, hi)
        curt, q = split_input(u)
        U[s] = u
        V[s] = lindistflow_voltages(feeder, feeder.p_mpp[k] + curt, q, k, mats)
    if noise:
        V = V + noise * rng.standard_normal(V.shape)
    return U, V


def switch_pcc(feeder, new_pcc):
    """Same lines and schedules, slack moved to ``new_pcc``."""
    if not 0 <= int(new_pcc) < feeder.n_b:
        raise InvalidArgumentError(f"unknown bus {new_pcc}")
    return replace(feeder, pcc=int(new_pcc))


def _random_tree(n_b, rng, r_range, xr_range):
    lines = []
    depth = [0]
    for bus in range(1, n_b):
        # favour attaching to recent buses so the feeder is long rather than bushy
        parent = bus - 1 if rng.uniform() < 0.7 else int(rng.integers(bus))
        r = rng.uniform(*r_range)
        x = r * rng.uniform(*xr_range)
        lines.append((parent, bus, float(r), float(x)))
        depth.append(depth[parent] + 1)
    return tuple(lines), np.array(depth)


def daily_profiles(K, n_b, n_pv, rng, mpp_peak, load_peak):
    t = np.linspace(0.0, 1.0, K)
    sun = np.clip(np.sin(np.pi * (t - 0.2) / 0.6), 0.0, None) * ((t > 0.2) & (t < 0.8))
    p_mpp = mpp_peak * np.outer(sun, rng.uniform(0.8, 1.0, n_pv))
    hump = (0.5 + 0.5 * np.exp(-((t - 0.3) / 0.08) ** 2)
            + 0.8 * np.exp(-((t - 0.8) / 0.08) ** 2))
    base = load_peak * np.outer(hump, rng.uniform(0.5, 1.0, n_b))
    return p_mpp, base, 0.3 * base


@dataclass(frozen=True)
class FeederSpec:
    n_b: int = 12
    n_pv: int = 5
    seed: int = 6
    horizon: int = 288
    mpp_peak: float = 0.5
    load_peak: float = 0.08
    q_limit: float = 0.5
    r_range: tuple = (0.01, 0.04)
    xr_range: tuple = (0.2, 5.0)


def build_case(spec=FeederSpec()):
    """Deterministic synthetic feeder rooted at bus 0.

    Inverters sit on the deepest buses; MPP follows a half-sine over the day
    and the load a morning/evening double hump.
    """
    if spec.n_pv > spec.n_b - 1:
        raise InvalidArgumentError("need n_pv <= n_b - 1")
    rng = np.random.default_rng(spec.seed)
    lines, depth = _random_tree(spec.n_b, rng, spec.r_range, spec.xr_range)
    order = sorted(range(1, spec.n_b), key=lambda b: (-depth[b], b))
    pv = tuple(sorted(order[:spec.n_pv]))
    p_mpp, load_p, load_q = daily_profiles(spec.horizon, spec.n_b, spec.n_pv, rng,
                                           spec.mpp_peak, spec.load_peak)
    load_p[:, 0] = 0.0
    load_q[:, 0] = 0.0
    return RadialFeeder(spec.n_b, lines, 0, pv, load_p, load_q, p_mpp,
                        -spec.q_limit, spec.q_limit)


def feeder_plant(feeder, v_ref=1.0):
    """Closed-loop view of a feeder: a static plant plus its schedule.

    The disturbance schedule enters as ``d_y`` and the per-step inverter
    bounds as the schedule's box.
    """
    H = sensitivity_matrix(feeder)
    D = disturbance_schedule(feeder)
    K = feeder.horizon
    lo = np.empty((K, 2 * feeder.n_pv))
    hi = np.empty_like(lo)
    for k in range(K):
        lo[k], hi[k] = input_box(feeder, k)
    signals = SignalSchedule(np.zeros((K, 0)), D, np.full((K, feeder.n_pv), v_ref), lo, hi)
    return StaticPlant(H), signals
