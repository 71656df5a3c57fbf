"""Generalized Polya urn sampling for the inner and outer spike-and-slab models.

Randomness is organised in blocks of ``BLOCK_SIZE`` replicates.  Block b of a
run with master seed s draws from two Philox streams keyed by the seed
sequence (s, b, 0) (urn uniforms) and (s, b, 1) (atom values), so results do
not depend on how blocks are spread over worker threads.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from .core import ClusterState, HnrmiModel, PredictiveWeights, predictive
from .kernels import run_urn
from .nig import NigParams, nig_predictive
from .stable import StableParams, stable_predictive, standard_normal
from .urn import make_urn

__all__ = [
    "BLOCK_SIZE",
    "ValuedState",
    "SampleSpec",
    "UrnTrajectory",
    "UrnBlock",
    "block_streams",
    "urn_step",
    "sample_trajectory",
    "outer_sample",
    "simulate",
    "write_trajectories_tsv",
]

BLOCK_SIZE = 4096

Params = Union[StableParams, NigParams]


def block_streams(seed: int, block: int):
    """(uniform stream, atom stream) for one block of replicates."""
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    g_u = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block, 0])))
    g_x = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block, 1])))
    return g_u, g_x


# ---------------------------------------------------------------------------
# states with atom values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValuedState:
    """A clustered sample together with its distinct values.

    ``atoms[l]`` is the value shared by cluster l; the spike cluster (if any)
    must carry the spike location.  ``clusters`` is None for the empty sample.
    """

    clusters: Optional[ClusterState]
    atoms: tuple = ()

    def __post_init__(self):
        atoms = tuple(float(a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        k = 0 if self.clusters is None else self.clusters.k
        if len(atoms) != k:
            raise ValueError(f"need one atom per cluster ({k}), got {len(atoms)}")

    @property
    def n(self) -> int:
        return 0 if self.clusters is None else self.clusters.n

    @classmethod
    def empty(cls) -> "ValuedState":
        return cls(None, ())

    @classmethod
    def from_counts(cls, slab_counts: Sequence[int], slab_atoms: Sequence[float],
                    n_spike: int = 0, x0: float = 0.0) -> "ValuedState":
        """Slab clusters first, spike cluster (when n_spike > 0) last."""
        freqs = list(slab_counts)
        atoms = list(slab_atoms)
        spike = None
        if n_spike > 0:
            freqs.append(n_spike)
            atoms.append(x0)
            spike = len(freqs)
        if not freqs:
            return cls.empty()
        return cls(ClusterState(tuple(freqs), spike), tuple(atoms))

    def split(self):
        """(slab counts, slab atoms, spike count) in cluster order."""
        if self.clusters is None:
            return [], [], 0
        j = self.clusters.spike_index
        counts, atoms = [], []
        for l, (f, a) in enumerate(zip(self.clusters.freqs, self.atoms)):
            if j is not None and l == j - 1:
                continue
            counts.append(f)
            atoms.append(a)
        return counts, atoms, self.clusters.spike_size


def _model_info(params):
    """(predictive function, x0, base sampler) for a parameter object."""
    if isinstance(params, StableParams):
        return (lambda st: stable_predictive(st, params)), params.x0, params.base_sampler
    if isinstance(params, NigParams):
        return (lambda st: nig_predictive(st, params)), params.x0, params.base_sampler
    if isinstance(params, HnrmiModel):
        return (lambda st: predictive(params, st)), 0.0, standard_normal
    raise TypeError(f"unsupported model parameters {type(params).__name__}")


def _step(state: ValuedState, params, rng: np.random.Generator):
    """One urn draw; returns (value, new state, slab label or -1 for spike)."""
    pred, x0, base = _model_info(params)
    zeta = params.zeta
    if state.clusters is None:
        if rng.random() < zeta:
            return x0, ValuedState(ClusterState((1,), 1), (x0,)), -1
        x = float(base(rng, None))
        return x, ValuedState(ClusterState((1,)), (x,)), 0
    cs = state.clusters
    w: PredictiveWeights = pred(cs)
    probs = w.as_vector()
    probs = probs / probs.sum()
    choice = rng.choice(probs.size, p=probs)
    freqs = list(cs.freqs)
    atoms = list(state.atoms)
    spike = cs.spike_index
    n_slab = cs.k - (spike is not None)
    if choice == 0:
        if spike is None and rng.random() < zeta:
            freqs.append(1)
            atoms.append(x0)
            return x0, ValuedState(ClusterState(tuple(freqs), len(freqs)), tuple(atoms)), -1
        x = float(base(rng, None))
        freqs.append(1)
        atoms.append(x)
        return x, ValuedState(ClusterState(tuple(freqs), spike), tuple(atoms)), n_slab
    if choice == 1:
        freqs[spike - 1] += 1
        return x0, ValuedState(ClusterState(tuple(freqs), spike), tuple(atoms)), -1
    l = choice - 2
    freqs[l] += 1
    label = l - (spike is not None and spike - 1 < l)
    return atoms[l], ValuedState(ClusterState(tuple(freqs), spike), tuple(atoms)), label


def urn_step(state: ValuedState, params, rng: np.random.Generator):
    """Draw X_{n+1} given the sample and return (value, updated state).

    Without a spike cluster the fresh-value branch draws from
    P0 = zeta delta_{x0} + (1-zeta) P*; with one it draws from P* and the spike
    has its own weight.  This reference implementation evaluates the exact
    predictive weights at every step, so it works for any model (including a
    generic :class:`HnrmiModel`) but is slow.
    """
    x, new, _ = _step(state, params, rng)
    return x, new


# ---------------------------------------------------------------------------
# batched sampling
# ---------------------------------------------------------------------------

@dataclass
class UrnBlock:
    """Output of one block of replicates.

    ``labels[r, s]`` is -1 for a spike draw and otherwise the slab cluster id
    (initial slab clusters first, then new clusters in order of creation).
    ``values`` is filled only in value mode.
    """

    block: int
    first_replicate: int
    labels: np.ndarray
    values: Optional[np.ndarray] = None
    n_spike0: int = 0
    init_counts: tuple = ()

    @property
    def n_spike(self) -> np.ndarray:
        """Spike count of every replicate after the draws (observed included)."""
        return self.n_spike0 + (self.labels == -1).sum(axis=1)


def _labels_to_values(labels, init_atoms, x0, Z):
    R, m = labels.shape
    K0 = len(init_atoms)
    atoms = np.empty((R, K0 + m))
    atoms[:, :K0] = init_atoms
    prev = np.maximum.accumulate(
        np.concatenate([np.full((R, 1), K0 - 1), labels[:, :-1]], axis=1), axis=1
    ) if m > 0 else np.zeros((R, 0))
    new = (labels >= K0) & (labels > prev)
    r_idx, s_idx = np.nonzero(new)
    atoms[r_idx, labels[r_idx, s_idx]] = Z[r_idx, s_idx]
    safe = np.where(labels >= 0, labels, 0)
    vals = np.take_along_axis(atoms, safe, axis=1)
    return np.where(labels == -1, x0, vals)


def simulate(
    params: Params,
    m: int,
    reps: int,
    seed: int,
    initial: Optional[ValuedState] = None,
    outer: bool = False,
    values: bool = False,
    reducer: Optional[Callable[[UrnBlock], Any]] = None,
    workers: int = 1,
    backend: Optional[str] = None,
    block_size: int = BLOCK_SIZE,
) -> list:
    """Run ``reps`` independent urns of ``m`` draws each.

    Returns the list of per-block results in block order: ``reducer(block)``
    when a reducer is given, the :class:`UrnBlock` itself otherwise.  With
    ``outer=True`` the outer model is sampled (independent zeta-coin for the
    spike, diffuse urn on the slab draws).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    initial = initial or ValuedState.empty()
    init_counts, init_atoms, n_spike0 = initial.split()
    n_init = initial.n
    if n_spike0 > 0 and params.zeta == 0.0:
        raise ValueError("a spike cluster has probability zero when zeta = 0")
    urn = make_urn(params).prepare(n_init + m + 1)
    n_blocks = math.ceil(reps / block_size)

    def one(b):
        g_u, g_x = block_streams(seed, b)
        size = min(block_size, reps - b * block_size)
        U = g_u.random((size, m, 2))
        labels = run_urn(U, init_counts, n_spike0, n_init, outer, urn, backend)
        vals = None
        if values:
            Z = np.asarray(params.base_sampler(g_x, (size, m)), dtype=float)
            vals = _labels_to_values(labels, np.asarray(init_atoms, float), params.x0, Z)
        blk = UrnBlock(b, b * block_size, labels, vals, n_spike0, tuple(init_counts))
        return reducer(blk) if reducer is not None else blk

    if workers <= 1 or n_blocks == 1:
        return [one(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, range(n_blocks)))


# ---------------------------------------------------------------------------
# single trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    """What to sample: model, parameters, starting sample and length."""

    model: str
    params: Any
    m: int
    seed: int
    initial_config: Optional[ValuedState] = None
    outer: bool = False

    def __post_init__(self):
        if self.model not in ("stable", "nig", "generic"):
            raise ValueError(f"model must be stable, nig or generic, got {self.model!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.seed is None:
            raise ValueError("an explicit seed is required")
        expected = {"stable": StableParams, "nig": NigParams, "generic": HnrmiModel}[self.model]
        if not isinstance(self.params, expected):
            raise TypeError(f"model {self.model!r} needs {expected.__name__}")
        if self.outer and self.model == "generic":
            raise ValueError("outer sampling is available for stable and nig models")

    @property
    def n_initial(self) -> int:
        return 0 if self.initial_config is None else self.initial_config.n


@dataclass(frozen=True)
class UrnTrajectory:
    initial_state: ValuedState
    drawn_values: np.ndarray
    labels: np.ndarray
    final_state: ValuedState
    seed: int

    @property
    def is_spike(self) -> np.ndarray:
        return self.labels == -1


def _final_state(initial: ValuedState, labels, vals, x0) -> ValuedState:
    counts, atoms, ns = initial.split()
    counts, atoms = list(counts), list(atoms)
    for lab, v in zip(labels.tolist(), vals.tolist()):
        if lab == -1:
            ns += 1
        elif lab == len(counts):
            counts.append(1)
            atoms.append(v)
        else:
            counts[lab] += 1
    return ValuedState.from_counts(counts, atoms, ns, x0)


def sample_trajectory(spec: SampleSpec, backend: Optional[str] = None) -> UrnTrajectory:
    """Draw m further observations from the urn described by ``spec``."""
    initial = spec.initial_config or ValuedState.empty()
    if spec.model == "generic":
        rng = block_streams(spec.seed, 0)[0]
        state = initial
        out, labels = [], []
        for _ in range(spec.m):
            x, state, lab = _step(state, spec.params, rng)
            out.append(x)
            labels.append(lab)
        return UrnTrajectory(initial, np.array(out), np.array(labels, dtype=np.int32),
                             state, spec.seed)
    blk = simulate(spec.params, spec.m, 1, spec.seed, initial=initial, outer=spec.outer,
                   values=True, backend=backend)[0]
    labels = blk.labels[0]
    vals = blk.values[0]
    final = _final_state(initial, labels, vals, spec.params.x0)
    return UrnTrajectory(initial, vals, labels, final, spec.seed)


def outer_sample(m: int, params: Params, seed: int, backend: Optional[str] = None) -> np.ndarray:
    """m draws from the outer model zeta delta_{x0} + (1-zeta) Q*, where Q*
    is the diffuse-base random measure of the same family."""
    spec = SampleSpec("stable" if isinstance(params, StableParams) else "nig",
                      params, m, seed, outer=True)
    return sample_trajectory(spec, backend).drawn_values


def write_trajectories_tsv(path, blocks: Sequence[UrnBlock]) -> None:
    """Tab-separated dump: replicate_id, step, value, is_spike, cluster_id.

    ``cluster_id`` is -1 for spike draws.  Blocks must be in value mode.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["replicate_id", "step", "value", "is_spike", "cluster_id"])
        for blk in blocks:
            if blk.values is None:
                raise ValueError("trajectory dump needs value-mode blocks")
            R, m = blk.labels.shape
            for r in range(R):
                rid = blk.first_replicate + r
                for s in range(m):
                    lab = int(blk.labels[r, s])
                    w.writerow([rid, s + 1, repr(float(blk.values[r, s])),
                                int(lab == -1), lab])
