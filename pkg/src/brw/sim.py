"""Event-driven simulation of branching random walks.

Edge breeding: each particle at ``x`` dies at rate 1 and sends a child to
``y`` at rate ``lam * n_xy``.  Site breeding: each particle breeds at rate
``lam`` and places the child by a row-stochastic kernel ``p(x, .)``.
Families are truncated to ``B(root, radius)``; children born outside are
discarded, so every survival frequency is a lower estimate at that radius.

Conventions printed with every estimate:

* reaching ``pop_cap`` counts as global survival;
* local survival is the proxy "alive at ``t_max`` (or capped) and root
  occupied at some sample time in ``[t0, t_max]``" (for a cap hit: at a
  sample before the cap or at the cap time itself).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import binomtest

from . import _kernel
from .errors import ConfigError, DomainError, ResourceError
from .families import srw
from .genfun import is_stochastic
from .graph_core import GraphFamily, WeightedMultigraph, materialize
from .quotient import QuotientMap

STATUS = {0: "extinct", 1: "cap_hit", 2: "horizon_end"}
REBUILD_EVERY = 1 << 14
RATE_GUARD = 1e300


@dataclass(frozen=True, eq=False)
class SimConfig:
    graph: Any
    lam: float
    mode: str = "edge"
    kernel: Any = None
    radius: int | None = None
    init: Mapping | None = None
    t_max: float = 100.0
    pop_cap: int = 10_000
    boundary_policy: str = "kill"
    seed: int = 0
    record_dt: float = 1.0
    record_times: Sequence[float] | None = None

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lambda must be finite and >= 0, got {self.lam!r}")
        if self.mode not in ("edge", "site"):
            raise ConfigError(f"mode must be 'edge' or 'site', got {self.mode!r}")
        if type(self.pop_cap) is not int or self.pop_cap < 1:
            raise ConfigError("pop_cap must be an integer >= 1")
        if self.boundary_policy != "kill":
            raise ConfigError("only the 'kill' boundary policy is supported")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        if self.radius is not None and self.radius < 1:
            raise ConfigError("truncation radius must be >= 1")
        if self.mode == "edge" and self.kernel is not None:
            raise ConfigError("a breeding kernel only applies to site mode")

    @property
    def root(self):
        g = self.graph
        return g.root if isinstance(g, GraphFamily) else g.vertices[0]

    def sample_times(self) -> np.ndarray:
        if self.record_times is not None:
            ts = np.asarray(sorted(self.record_times), dtype=float)
        else:
            k = int(math.floor(self.t_max / self.record_dt + 1e-9))
            ts = self.record_dt * np.arange(k + 1)
        return ts[(ts >= 0) & (ts <= self.t_max)]

    def describe(self) -> dict:
        g = self.graph
        name = g.name if isinstance(g, GraphFamily) else "graph"
        params = dict(g.params) if isinstance(g, GraphFamily) else {"vertices": len(g)}
        return {
            "graph": name,
            "graph_params": params,
            "mode": self.mode,
            "lambda": self.lam,
            "radius": self.radius,
            "t_max": self.t_max,
            "pop_cap": self.pop_cap,
            "boundary_policy": self.boundary_policy,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class Prepared:
    """Array form of a truncated graph and breeding kernel, ready for the kernel."""

    vertices: tuple
    index: Mapping
    dist: Mapping
    row_ptr: np.ndarray
    nbr: np.ndarray
    cum: np.ndarray
    weight: np.ndarray
    root: int


def _finite_of(g):
    if isinstance(g, WeightedMultigraph):
        return g
    return g.finite


def prepare(config: SimConfig) -> Prepared:
    g = config.graph
    root = config.root
    fin = _finite_of(g)
    if config.mode == "site":
        kern = config.kernel if config.kernel is not None else srw(g)
        if not is_stochastic(kern):
            raise DomainError("site-mode kernel rows must sum to 1")
    else:
        kern = g
    if fin is not None and config.radius is None:
        kfin = kern if isinstance(kern, WeightedMultigraph) else _finite_of(kern)
        verts = fin.vertices
        dist = materialize(fin, root, len(fin)).dist
        rows = [kfin.neighbors(v) for v in verts]
    else:
        radius = config.radius if config.radius is not None else len(fin)
        b = materialize(g, root, radius)
        verts = b.graph.vertices
        dist = b.dist
        rows = [kern.neighbors(v) for v in verts]
    index = {v: i for i, v in enumerate(verts)}
    row_ptr = [0]
    nbr: list[int] = []
    cum: list[float] = []
    weight = []
    for row in rows:
        tot = float(sum(w for _, w in row))
        if tot <= 0:
            raise DomainError("every site needs positive breeding weight")
        acc = 0.0
        for y, w in row:
            acc += float(w)
            nbr.append(index.get(y, -1))
            cum.append(acc / tot)
        cum[-1] = 1.0
        row_ptr.append(len(nbr))
        weight.append(tot)
    return Prepared(
        vertices=tuple(verts),
        index=index,
        dist=dist,
        row_ptr=np.asarray(row_ptr, dtype=np.int64),
        nbr=np.asarray(nbr, dtype=np.int64),
        cum=np.asarray(cum, dtype=float),
        weight=np.asarray(weight, dtype=float),
        root=index[root],
    )


def _rates(config: SimConfig, prep: Prepared) -> np.ndarray:
    c = 1.0 + config.lam * prep.weight
    if config.pop_cap * float(c.max()) > RATE_GUARD:
        raise ConfigError("total event rate would overflow; use a smaller pop_cap")
    return c


def _init_vector(config: SimConfig, prep: Prepared) -> np.ndarray:
    init = np.zeros(len(prep.vertices), dtype=np.int64)
    spec = config.init if config.init is not None else {config.root: 1}
    for v, k in spec.items():
        if v not in prep.index:
            raise ConfigError(f"initial vertex {v!r} is not in the simulated region")
        if type(k) is not int or k < 0:
            raise ConfigError("initial counts must be nonnegative integers")
        init[prep.index[v]] += k
    return init


PILOT_TRIALS = 100
PILOT_STREAM = 2**32 - 1
BOUNDARY_SHARE = 1e-3


def needs_radius(config: SimConfig) -> bool:
    g = config.graph
    return config.radius is None and isinstance(g, GraphFamily) and g.finite is None


def choose_radius(config: SimConfig, pilot_trials: int = PILOT_TRIALS, start: int = 4, step: int = 4,
                  max_radius: int = 64, max_vertices: int = 200_000) -> int:
    """Smallest radius in ``start, start+step, ...`` at which pilot runs discard < 0.1% of births.

    Pilots use their own stream (``PILOT_STREAM``) and ``pop_cap <= 1000``.
    When the ball outgrows ``max_vertices`` the last feasible radius is
    returned; the boundary share is then larger than the target.
    """
    best = None
    pilot_cap = min(config.pop_cap, 1000)
    for r in range(start, max_radius + 1, step):
        cfg = replace(config, radius=r, pop_cap=pilot_cap)
        try:
            materialize(config.graph, config.root, r, max_vertices=max_vertices)
        except ResourceError:
            break
        b = run_trials(cfg, pilot_trials, stream=(PILOT_STREAM,))
        best = r
        born = int(b.births.sum())
        if born == 0 or b.births_discarded.sum() < BOUNDARY_SHARE * born:
            break
    if best is None:
        raise ConfigError("no feasible truncation radius; give --radius explicitly")
    return best


def resolve(config: SimConfig) -> SimConfig:
    """``config`` with a truncation radius filled in for infinite families."""
    return replace(config, radius=choose_radius(config)) if needs_radius(config) else config


def trial_rng(master: int, *path: int) -> np.random.Generator:
    """Generator of the stream at ``path`` (e.g. ``(trial,)`` or ``(lam_index, trial)``).

    ``SeedSequence(master, spawn_key=path)`` names each stream, so any trial
    can be reproduced on its own, in any order and under any threading.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master, spawn_key=tuple(path))))


@dataclass(frozen=True, eq=False)
class SimOutcome:
    status: str
    t_end: float
    sample_times: np.ndarray
    population: np.ndarray
    root_counts: np.ndarray
    root_occupied_after: float | None
    events_processed: int
    births_discarded: int
    max_population: int
    final_population: int
    root_final: int
    seed: int
    trial: int = 0
    births: int = 0
    rate_error: float = 0.0
    site_counts: tuple | None = None
    vertices: tuple | None = None

    def to_json(self) -> dict:
        out = {
            "status": self.status,
            "t_end": self.t_end,
            "sample_times": self.sample_times.tolist(),
            "population": self.population.tolist(),
            "root_counts": self.root_counts.tolist(),
            "root_occupied_after": self.root_occupied_after,
            "events_processed": self.events_processed,
            "births": self.births,
            "births_discarded": self.births_discarded,
            "max_population": self.max_population,
            "seed": self.seed,
            "trial": self.trial,
        }
        if self.site_counts is not None:
            out["site_counts"] = [
                {json.dumps(v, default=str): int(k) for v, k in snap.items()} for snap in self.site_counts
            ]
        return out

    def dumps(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True).encode()


def run_trial(config: SimConfig, trial: int = 0, record_sites: bool = False,
              debug_every: int = 0, prepared: Prepared | None = None) -> SimOutcome:
    """Simulate one trajectory exactly in distribution (Gillespie with a Fenwick site index)."""
    config = resolve(config)
    prep = prepared or prepare(config)
    c = _rates(config, prep)
    init = _init_vector(config, prep)
    ts = config.sample_times()
    r = _kernel.simulate(
        prep.row_ptr, prep.nbr, prep.cum, c, prep.root, init, float(config.t_max),
        int(config.pop_cap), ts, bool(record_sites), np.zeros(1, dtype=np.int64), 0,
        int(debug_every), REBUILD_EVERY, trial_rng(config.seed, trial),
    )
    status, t_end, events, killed, max_pop, pop, root_end, last_root, err, pop_s, root_s, site_s, _, births = r
    sites = None
    if record_sites:
        # unknown samples (after a cap hit) are None
        sites = tuple(
            None if pop_s[k] < 0 else {prep.vertices[i]: int(row[i]) for i in np.flatnonzero(row > 0)}
            for k, row in enumerate(site_s)
        )
    return SimOutcome(
        status=STATUS[int(status)],
        t_end=float(t_end),
        sample_times=ts,
        population=pop_s,
        root_counts=root_s,
        root_occupied_after=None if last_root < 0 else float(last_root),
        events_processed=int(events),
        births_discarded=int(killed),
        births=int(births),
        max_population=int(max_pop),
        final_population=int(pop),
        root_final=int(root_end),
        seed=config.seed,
        trial=trial,
        rate_error=float(err),
        site_counts=sites,
        vertices=prep.vertices if record_sites else None,
    )


@dataclass(frozen=True, eq=False)
class TrialBatch:
    status: np.ndarray
    t_end: np.ndarray
    events: np.ndarray
    births_discarded: np.ndarray
    root_final: np.ndarray
    last_root: np.ndarray
    population: np.ndarray
    root_counts: np.ndarray
    class_counts: np.ndarray
    births: np.ndarray
    sample_times: np.ndarray


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("BRW_THREADS", "1") or 1)
    return max(1, threads)


def run_trials(config: SimConfig, trials: int, threads: int | None = None,
               classes: QuotientMap | None = None, stream: Sequence[int] = ()) -> TrialBatch:
    """``trials`` independent runs; trial ``i`` uses ``trial_rng(seed, *stream, i)``.

    With ``classes`` the per-class totals at each sample time are recorded
    (the projection of the configuration onto a quotient).
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    config = resolve(config)
    prep = prepare(config)
    c = _rates(config, prep)
    init = _init_vector(config, prep)
    ts = config.sample_times()
    if classes is not None:
        if classes.verified_radius is None:
            raise DomainError("projection needs a verified quotient map")
        cls_index = {v: i for i, v in enumerate(classes.codomain.vertices)}
        cls_arr = np.asarray([cls_index[classes(v)] for v in prep.vertices], dtype=np.int64)
        n_cls = len(cls_index)
    else:
        cls_arr = np.zeros(1, dtype=np.int64)
        n_cls = 0
    S = ts.size
    status = np.zeros(trials, dtype=np.int64)
    t_end = np.zeros(trials)
    events = np.zeros(trials, dtype=np.int64)
    killed = np.zeros(trials, dtype=np.int64)
    births = np.zeros(trials, dtype=np.int64)
    root_end = np.zeros(trials, dtype=np.int64)
    last_root = np.zeros(trials)
    pop_s = np.zeros((trials, S), dtype=np.int64)
    root_s = np.zeros((trials, S), dtype=np.int64)
    cls_s = np.zeros((trials, S, n_cls), dtype=np.int64)

    def run(chunk):
        # the kernel releases the GIL, so chunks can share a thread pool
        for i in chunk:
            r = _kernel.simulate(
                prep.row_ptr, prep.nbr, prep.cum, c, prep.root, init, float(config.t_max),
                int(config.pop_cap), ts, False, cls_arr, n_cls, 0, REBUILD_EVERY,
                trial_rng(config.seed, *stream, int(i)),
            )
            status[i], t_end[i], events[i], killed[i] = r[0], r[1], r[2], r[3]
            root_end[i], last_root[i], births[i] = r[6], r[7], r[13]
            pop_s[i], root_s[i] = r[9], r[10]
            if n_cls:
                cls_s[i] = r[12]

    n_thr = min(_threads(threads), trials)
    chunks = np.array_split(np.arange(trials), n_thr)
    if n_thr == 1:
        run(chunks[0])
    else:
        with ThreadPoolExecutor(n_thr) as ex:
            list(ex.map(run, chunks))
    return TrialBatch(status, t_end, events, killed, root_end, last_root, pop_s, root_s, cls_s, births,
                      sample_times=ts)


def wilson(k: int, n: int) -> tuple[float, float]:
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class SurvivalEstimate:
    lam: float
    trials: int
    global_count: int
    local_count: int
    global_freq: float
    global_ci: tuple
    local_freq: float
    local_ci: tuple
    t0: float
    t_max: float
    radius: int | None
    pop_cap: int
    seed: int
    cap_hits: int
    births_discarded: int
    conventions: str = (
        "cap hit counts as global survival; local = globally surviving and root occupied at a sample "
        "time in [t0, t_max] "
        "(or at the cap time); truncated runs give a lower estimate at the stated radius"
    )

    def row(self) -> dict:
        return {
            "lambda": self.lam,
            "trials": self.trials,
            "global_freq": self.global_freq,
            "global_lo": self.global_ci[0],
            "global_hi": self.global_ci[1],
            "local_freq": self.local_freq,
            "local_lo": self.local_ci[0],
            "local_hi": self.local_ci[1],
            "radius": self.radius,
            "cap": self.pop_cap,
            "seed": self.seed,
        }


CSV_COLUMNS = ["lambda", "trials", "global_freq", "global_lo", "global_hi", "local_freq",
               "local_lo", "local_hi", "radius", "cap", "seed"]


def survival_flags(batch: TrialBatch, t0: float, t_max: float):
    """Per-trial ``(global, local)`` survival indicators."""
    glob = batch.status != 0
    window = (batch.sample_times >= t0) & (batch.sample_times <= t_max)
    seen = (batch.root_counts[:, window] > 0).any(axis=1)
    at_cap = (batch.status == 1) & (batch.root_final > 0)
    # local survival implies global survival: trials extinct by t_max never count
    return glob, glob & (seen | at_cap)


def estimate_survival(config: SimConfig, trials: int, t0: float | None = None,
                      threads: int | None = None, stream: Sequence[int] = ()) -> SurvivalEstimate:
    """Global and local survival frequencies with Wilson 95% intervals."""
    if t0 is None:
        t0 = config.t_max / 2
    if not 0 <= t0 < config.t_max:
        raise ConfigError("t0 must lie in [0, t_max)")
    config = resolve(config)
    batch = run_trials(config, trials, threads=threads, stream=stream)
    glob, loc = survival_flags(batch, t0, config.t_max)
    kg, kl = int(glob.sum()), int(loc.sum())
    return SurvivalEstimate(
        lam=config.lam,
        trials=trials,
        global_count=kg,
        local_count=kl,
        global_freq=kg / trials,
        global_ci=wilson(kg, trials),
        local_freq=kl / trials,
        local_ci=wilson(kl, trials),
        t0=t0,
        t_max=config.t_max,
        radius=config.radius,
        pop_cap=config.pop_cap,
        seed=config.seed,
        cap_hits=int((batch.status == 1).sum()),
        births_discarded=int(batch.births_discarded.sum()),
    )


def sweep_lambda(config: SimConfig, grid: Sequence[float], trials: int, t0: float | None = None,
                 threads: int | None = None) -> list[SurvivalEstimate]:
    """One survival estimate per ``lam``; grid point ``i`` uses streams ``(i, trial)``."""
    grid = list(grid)
    if not grid:
        raise ConfigError("lambda grid is empty")
    if grid != sorted(grid):
        raise ConfigError("lambda grid must be sorted")
    # one radius for the whole grid, chosen at the most spreading lambda
    config = replace(resolve(replace(config, lam=float(grid[-1]))), lam=config.lam)
    return [
        estimate_survival(replace(config, lam=float(lam)), trials, t0=t0, threads=threads, stream=(i,))
        for i, lam in enumerate(grid)
    ]


def sweep_csv(rows: Sequence[SurvivalEstimate]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()


def project(outcome: SimOutcome, qmap: QuotientMap) -> np.ndarray:
    """Class-summed counts ``xi_t(y) = sum_{phi(x) = y} eta_t(x)`` at every sample time.

    Rows of unknown samples (after a cap hit) are -1.
    """
    if qmap.verified_radius is None:
        raise DomainError("refusing to project with an unverified quotient map")
    if outcome.site_counts is None:
        raise DomainError("trajectory was recorded without per-site counts")
    cls = {v: i for i, v in enumerate(qmap.codomain.vertices)}
    out = np.full((len(outcome.site_counts), len(cls)), -1, dtype=np.int64)
    for k, snap in enumerate(outcome.site_counts):
        if snap is None:
            continue
        out[k] = 0
        for v, m in snap.items():
            out[k, cls[qmap(v)]] += m
    return out


# --- shared-randomness coupling --------------------------------------------


@dataclass(frozen=True)
class CoupledResult:
    lambdas: tuple
    radii: tuple
    survived: tuple
    final_populations: tuple


def run_coupled(config: SimConfig, lambdas: Sequence[float], radii: Sequence[int] | None = None,
                trial: int = 0) -> CoupledResult:
    """Monotone coupling of several processes driven by one event skeleton.

    Process ``j`` has breeding rate ``lambdas[j]`` and truncation radius
    ``radii[j]``; both must be nondecreasing in ``j``.  Every particle has a
    grade ``g``: it belongs to processes ``g, g+1, ...``.  The largest
    process is simulated; a child belongs to process ``j`` iff its parent
    does, ``U < lambdas[j] / lambdas[-1]`` for one uniform ``U`` per birth, and
    it lands inside radius ``radii[j]``.  Each process is then a correct
    marginal BRW and process populations are nested, trial by trial.
    """
    lams = tuple(float(v) for v in lambdas)
    K = len(lams)
    if K == 0 or list(lams) != sorted(lams) or lams[-1] <= 0:
        raise ConfigError("lambdas must be nonempty, nondecreasing and end positive")
    if radii is None:
        radii = (resolve(replace(config, lam=lams[-1])).radius,) * K
    radii = tuple(radii)
    if len(radii) != K:
        raise ConfigError("need one radius per lambda")
    if radii[0] is not None and list(radii) != sorted(radii):
        raise ConfigError("radii must be nondecreasing")
    top = replace(config, lam=lams[-1], radius=radii[-1])
    prep = prepare(top)
    c = 1.0 + lams[-1] * prep.weight
    cmax = float(c.max())
    dist = [prep.dist[v] for v in prep.vertices]
    rng = random.Random(int(trial_rng(config.seed, trial).integers(2**63)))
    particles: list[list[int]] = []  # [site, grade]
    for i, k in enumerate(_init_vector(top, prep)):
        particles.extend([int(i), 0] for _ in range(int(k)))
    t = 0.0
    cap = config.pop_cap
    while particles and len(particles) < cap:
        t += rng.expovariate(len(particles) * cmax)
        if t > config.t_max:
            break
        j = rng.randrange(len(particles))
        x, g = particles[j]
        if rng.random() * cmax >= c[x]:
            continue  # thinned: no event
        if rng.random() * c[x] < 1.0:
            particles[j] = particles[-1]
            particles.pop()
            continue
        u = rng.random()
        lo, hi = prep.row_ptr[x], prep.row_ptr[x + 1] - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if prep.cum[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        y = int(prep.nbr[lo])
        if y < 0:
            continue
        v = rng.random() * lams[-1]
        grade = K
        for p in range(g, K):
            if v < lams[p] and (radii[p] is None or dist[y] <= radii[p]):
                grade = p
                break
        if grade < K:
            particles.append([y, grade])
    pops = [0] * K
    for _, g in particles:
        for p in range(g, K):
            pops[p] += 1
    return CoupledResult(lams, radii, tuple(p > 0 for p in pops), tuple(pops))
