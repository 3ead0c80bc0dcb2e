"""Server-side combination of client parameter updates.

Weighted federated averaging weights each update by its training-sample
count (w_i = n_i / sum n_j); plain averaging gives every update the same
weight.  Both accumulate in ascending client-id order and clamp each
output coordinate into the participants' [min, max] envelope, which
makes the convex-combination guarantee exact in floating point (a naive
dot product can escape the envelope by an ulp) and the result invariant
under reordering of the input list.  A uniform-noise operator supports
privacy-style perturbation of parameter vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import ParameterSet
from .seeding import rng_from


@dataclass(frozen=True)
class Update:
    """One client's submitted parameters with provenance.

    ``n`` is the number of training samples behind the update and
    ``produced_round`` the round whose broadcast it was trained from.
    """

    client_id: int
    params: ParameterSet
    n: int
    produced_round: int

    def __post_init__(self) -> None:
        if int(self.client_id) < 0:
            raise ValueError("client_id must be >= 0")
        if int(self.n) < 1:
            raise ValueError("an update must be backed by at least one sample")
        if int(self.produced_round) < 0:
            raise ValueError("produced_round must be >= 0")
        object.__setattr__(self, "client_id", int(self.client_id))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "produced_round", int(self.produced_round))


@dataclass(frozen=True)
class AggregateResult:
    params: ParameterSet
    weights_used: tuple[tuple[int, float], ...]  # (client_id, weight), ascending id
    total_n: int


def _ordered(updates: Sequence[Update]) -> list[Update]:
    if not updates:
        raise ValueError("cannot aggregate an empty update list")
    ordered = sorted(updates, key=lambda u: u.client_id)
    ids = [u.client_id for u in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate client ids in one aggregation")
    first = ordered[0].params
    for u in ordered[1:]:
        if u.params.shapes != first.shapes:
            raise ValueError("updates carry incompatible parameter layouts")
    return ordered


def _combine(ordered: list[Update], weights: list[float]) -> ParameterSet:
    vals = [u.params.values for u in ordered]
    acc = weights[0] * vals[0]
    for w, v in zip(weights[1:], vals[1:]):
        acc += w * v
    stacked = np.stack(vals)
    np.clip(acc, stacked.min(axis=0), stacked.max(axis=0), out=acc)
    return ordered[0].params.with_values(acc)


def weighted_fedavg(updates: Sequence[Update]) -> AggregateResult:
    """Sample-count-weighted average of the updates."""
    ordered = _ordered(updates)
    total = sum(u.n for u in ordered)
    weights = [u.n / total for u in ordered]
    return AggregateResult(
        params=_combine(ordered, weights),
        weights_used=tuple((u.client_id, w) for u, w in zip(ordered, weights)),
        total_n=total,
    )


def plain_average(updates: Sequence[Update]) -> AggregateResult:
    """Unweighted mean of the updates."""
    ordered = _ordered(updates)
    k = len(ordered)
    weights = [1.0 / k] * k
    return AggregateResult(
        params=_combine(ordered, weights),
        weights_used=tuple((u.client_id, w) for u, w in zip(ordered, weights)),
        total_n=sum(u.n for u in ordered),
    )


def add_uniform_noise(params: ParameterSet, amplitude: float, seed: int) -> ParameterSet:
    """Perturb every coordinate by i.i.d. uniform(-amplitude, amplitude) noise.

    Mean-zero, so averaging many independently noised copies of the same
    vector recovers the original.  Deterministic in ``seed``.
    """
    a = float(amplitude)
    if not (a > 0):
        raise ValueError("noise amplitude must be > 0")
    noise = rng_from(int(seed)).uniform(-a, a, size=params.size)
    return params.with_values(params.values + noise)
