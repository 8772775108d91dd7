"""Candidate-to-target assignment across receivers for multi-target scenes.

With K targets each receiver reports K detected delays, but nothing in a
single capture says which delay belongs to which target.  This module scores
every joint labeling (one permutation of the K candidates per receiver) by
trilaterating each hypothesized target and summing the residual costs; the
cheapest hypothesis wins.  Costs are invariant under a global relabeling of
the targets, so the minimum always appears in symmetric pairs; the
lexicographically smallest permutation tuple is returned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .solver import (
    BistaticMeasurementSet,
    GeometryError,
    PositionFix,
    SolverSettings,
    trilaterate,
)

# Hard guard against combinatorial blow-up: (K!)^M hypotheses are enumerated
# exhaustively and there is no pruning, so refuse anything past this.
MAX_HYPOTHESES = 10_000

# Scoring runs the solver once per target per hypothesis; fewer restarts keep
# that affordable.  The winner is re-solved afterwards at full restarts.
SCORING_RESTARTS = 8

_TIE_RTOL = 1e-9


class AssociationError(RuntimeError):
    """Raised when assignment enumeration or scoring cannot produce a winner."""


@dataclass(frozen=True)
class MeasurementContext:
    """Geometry and scaling needed to turn delay candidates into range sets."""

    receiver_positions: tuple
    transmitter_pos: np.ndarray
    delay_bin_m: float

    def __post_init__(self):
        object.__setattr__(
            self,
            "receiver_positions",
            tuple(np.asarray(r, dtype=float) for r in self.receiver_positions),
        )
        object.__setattr__(
            self, "transmitter_pos", np.asarray(self.transmitter_pos, dtype=float)
        )
        if not np.isfinite(self.delay_bin_m) or self.delay_bin_m <= 0.0:
            raise ValueError("delay_bin_m must be positive and finite")


@dataclass(frozen=True)
class AssignmentHypothesis:
    """One joint labeling of per-receiver candidates, with its solver scores.

    permutations[m][k] is the candidate index at receiver m attributed to
    target k; each entry is a bijection of {0..K-1}.  total_cost is the sum
    of the per-target trilateration costs (+inf when any target failed to
    solve).  tied is set when a hypothesis that is not a global relabeling
    of this one achieves the same minimal cost.
    """

    permutations: tuple
    per_target_costs: tuple
    total_cost: float
    fixes: tuple
    tied: bool = False

    def __post_init__(self):
        if len(self.per_target_costs) != len(self.fixes):
            raise ValueError("per_target_costs and fixes must align")
        finite = [c for c in self.per_target_costs if math.isfinite(c)]
        if math.isfinite(self.total_cost):
            if abs(self.total_cost - sum(finite)) > 1e-6 * max(1.0, abs(self.total_cost)):
                raise ValueError("total_cost must equal the sum of per-target costs")

    @property
    def num_targets(self) -> int:
        return len(self.permutations[0])


def enumerate_assignments(num_targets: int, num_receivers: int, cap: int = MAX_HYPOTHESES):
    """All (K!)^M joint labelings, in lexicographic order.

    Returns a list of tuples, one permutation tuple per receiver.  Refuses
    (with AssociationError) when the count exceeds cap, since scoring is
    exhaustive and no pruning is implemented.
    """
    if num_targets < 1:
        raise ValueError("num_targets must be at least 1")
    if num_receivers < 3:
        raise ValueError("need at least three receivers to associate")
    count = math.factorial(num_targets) ** num_receivers
    if count > cap:
        raise AssociationError(
            f"{count} assignment hypotheses exceed the cap of {cap}; "
            "pruning is not implemented, reduce the target or receiver count"
        )
    perms = list(itertools.permutations(range(num_targets)))
    return [combo for combo in itertools.product(perms, repeat=num_receivers)]


def _solve_ranges(
    ranges: tuple,
    context: MeasurementContext,
    settings: SolverSettings,
    cache: dict,
):
    """Trilaterate one range tuple, memoized so relabelings score identically."""
    if ranges in cache:
        return cache[ranges]
    meas = BistaticMeasurementSet(
        ranges_m=np.asarray(ranges, dtype=float),
        radial_velocities_mps=None,
        receiver_positions=context.receiver_positions,
        transmitter_pos=context.transmitter_pos,
    )
    try:
        fix: Optional[PositionFix] = trilaterate(meas, settings)
    except (GeometryError, ValueError, np.linalg.LinAlgError):
        fix = None
    cache[ranges] = fix
    return fix


def score_assignment(
    hypothesis: tuple,
    delay_lists: Sequence[Sequence[float]],
    meas_context: MeasurementContext,
    settings: Optional[SolverSettings] = None,
    _fix_cache: Optional[dict] = None,
) -> AssignmentHypothesis:
    """Cost one labeling: trilaterate every hypothesized target and sum costs.

    delay_lists[m] holds the K detected delays (in bins, refinement allowed)
    at receiver m; meas_context.delay_bin_m converts them to bistatic ranges.
    A solver failure on any target makes the hypothesis cost +inf so it can
    never be selected.
    """
    if settings is None:
        settings = SolverSettings()
    if _fix_cache is None:
        _fix_cache = {}
    num_receivers = len(hypothesis)
    num_targets = len(hypothesis[0])
    if len(delay_lists) != num_receivers:
        raise ValueError("one delay list per receiver is required")
    for perm in hypothesis:
        if sorted(perm) != list(range(num_targets)):
            raise ValueError(f"{perm} is not a permutation of 0..{num_targets - 1}")
    for delays in delay_lists:
        if len(delays) != num_targets:
            raise ValueError("every receiver must supply one delay per target")

    costs = []
    fixes = []
    for k in range(num_targets):
        ranges = tuple(
            float(delay_lists[m][hypothesis[m][k]]) * meas_context.delay_bin_m
            for m in range(num_receivers)
        )
        fix = _solve_ranges(ranges, meas_context, settings, _fix_cache)
        if fix is None:
            costs.append(math.inf)
            fixes.append(None)
        else:
            costs.append(fix.residual_cost)
            fixes.append(fix)
    total = math.inf if any(math.isinf(c) for c in costs) else float(sum(costs))
    return AssignmentHypothesis(
        permutations=tuple(tuple(int(i) for i in perm) for perm in hypothesis),
        per_target_costs=tuple(costs),
        total_cost=total,
        fixes=tuple(fixes),
    )


def _relabel_class(permutations: tuple) -> tuple:
    """Canonical representative of a hypothesis under global target relabeling.

    Two hypotheses describe the same physical pairing when one is the other
    with all receivers' target indices permuted identically; normalizing the
    first receiver's permutation to the identity collapses each equivalence
    class to a single key.
    """
    first = permutations[0]
    inverse = [0] * len(first)
    for k, cand in enumerate(first):
        inverse[cand] = k
    return tuple(
        tuple(perm[inverse[j]] for j in range(len(first))) for perm in permutations
    )


def associate_targets(
    delay_lists: Sequence[Sequence[float]],
    meas_context: MeasurementContext,
    settings: Optional[SolverSettings] = None,
    cap: int = MAX_HYPOTHESES,
) -> AssignmentHypothesis:
    """Score every labeling and return the cheapest.

    The winner's targets are re-solved at the full restart budget before
    returning.  Among equal minima the lexicographically smallest permutation
    tuple wins; relabelings of the winner are expected ties and stay
    unflagged, while an equal-cost hypothesis with genuinely different
    pairing sets tied=True.
    """
    if settings is None:
        settings = SolverSettings()
    num_receivers = len(delay_lists)
    if num_receivers < 3:
        raise ValueError("need at least three receivers to associate")
    num_targets = len(delay_lists[0])
    for delays in delay_lists:
        if len(delays) != num_targets:
            raise ValueError("every receiver must supply the same number of candidates")
        arr = np.asarray(delays, dtype=float)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValueError("candidate delays must be finite scalars")

    hypotheses = enumerate_assignments(num_targets, num_receivers, cap=cap)
    scoring = replace(settings, restarts=min(SCORING_RESTARTS, settings.restarts))
    cache: dict = {}
    scored = [
        score_assignment(h, delay_lists, meas_context, scoring, _fix_cache=cache)
        for h in hypotheses
    ]

    best_cost = min(s.total_cost for s in scored)
    if not math.isfinite(best_cost):
        raise AssociationError("every assignment hypothesis failed to trilaterate")
    tol = _TIE_RTOL * max(1.0, abs(best_cost))
    minimal = [s for s in scored if s.total_cost <= best_cost + tol]
    tied = len({_relabel_class(s.permutations) for s in minimal}) > 1

    winner = minimal[0]  # scored list preserves lexicographic order
    if settings.restarts > scoring.restarts:
        winner = score_assignment(
            winner.permutations, delay_lists, meas_context, settings, _fix_cache={}
        )
        if not math.isfinite(winner.total_cost):
            raise AssociationError("winning hypothesis failed at full restarts")
    return replace(winner, tied=tied)
