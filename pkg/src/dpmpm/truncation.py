"""Structural zeros via data augmentation.

Each sweep draws complete records from the unrestricted mixture until ``n``
of them fall outside the disallowed patterns; the ones that fell inside form
the augmented sample, whose records and classes are pooled with the observed
data in the V/pi and theta updates.  Missing cells of observed records are
drawn from the mixture truncated to allowed combinations.
"""

from __future__ import annotations

import itertools
import logging

import numpy as np

from .catdata import MISSING, CategoricalDataset, DisallowedPatternSet
from .errors import DataError
from .sampler import (
    AugmentedSample,
    DpmpmState,
    HyperParams,
    _draw_index,
    gibbs_step,
    impute_missing_cells,
    sample_alpha,
    sample_theta,
    sample_V_and_pi,
    sample_z,
)

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 1000


def _empty_aug(p: int) -> AugmentedSample:
    return AugmentedSample(np.zeros((0, p), dtype=np.int64), np.zeros(0, dtype=np.int64))


def _draw_unrestricted(state: DpmpmState, size: int, rng: np.random.Generator):
    pcum = np.cumsum(state.pi)
    z = _draw_index(np.broadcast_to(pcum, (size, pcum.size)), rng.random(size))
    recs = np.empty((size, len(state.theta)), dtype=np.int64)
    for j, th in enumerate(state.theta):
        recs[:, j] = _draw_index(np.cumsum(th, axis=1)[z], rng.random(size))
    return recs, z


def draw_augmented(state: DpmpmState, mcz: DisallowedPatternSet, n: int, nmax: int,
                   rng: np.random.Generator | None = None) -> AugmentedSample:
    """Sample the augmented records for the current parameters.

    Stops at the ``n``-th draw outside ``mcz`` or when ``nmax`` inside draws
    have accumulated, whichever comes first.  No randomness is consumed when
    ``mcz`` is empty.
    """
    p = len(state.theta)
    if len(mcz) == 0 or n <= 0:
        return _empty_aug(p)
    rng = state.rng if rng is None else rng
    recs_in, z_in = [], []
    successes = nmis = 0
    hit_rate = 0.5
    while True:
        need = n - successes
        size = int(min(max(64, 1.1 * need / max(1.0 - hit_rate, 1e-3) + 16), 1 << 20))
        recs, z = _draw_unrestricted(state, size, rng)
        inside = mcz.matches(recs)
        hit_rate = 0.5 * hit_rate + 0.5 * float(inside.mean())
        csucc = np.cumsum(~inside)
        cin = np.cumsum(inside)
        stop_succ = int(np.searchsorted(csucc, need))          # index of the need-th success
        room = nmax - nmis
        stop_cap = int(np.searchsorted(cin, room)) if room > 0 else -1  # index of the room-th inside draw
        if stop_cap >= 0 and stop_cap < size and (stop_succ >= size or stop_cap < stop_succ):
            take = stop_cap + 1
            recs_in.append(recs[:take][inside[:take]])
            z_in.append(z[:take][inside[:take]])
            records = np.concatenate(recs_in)
            return AugmentedSample(records, np.concatenate(z_in), cap_hit=True)
        if stop_succ < size:
            take = stop_succ + 1
            recs_in.append(recs[:take][inside[:take]])
            z_in.append(z[:take][inside[:take]])
            return AugmentedSample(np.concatenate(recs_in), np.concatenate(z_in))
        recs_in.append(recs[inside])
        z_in.append(z[inside])
        successes += int(csucc[-1])
        nmis += int(cin[-1])


def allowed_completions(record: np.ndarray, d: np.ndarray, mcz: DisallowedPatternSet):
    """All fillings of the record's missing cells that avoid ``mcz``.

    Returns ``(missing_columns, completions)``; ``completions`` has one row
    per allowed filling.
    """
    cols = np.flatnonzero(record == MISSING)
    grids = list(itertools.product(*(range(int(d[j])) for j in cols)))
    fills = np.array(grids, dtype=np.int64).reshape(len(grids), cols.size)
    full = np.broadcast_to(record, (fills.shape[0], record.size)).copy()
    full[:, cols] = fills
    return cols, fills[~mcz.matches(full)]


def inconsistent_records(data: CategoricalDataset, mcz: DisallowedPatternSet) -> list[int]:
    """Indices of records that have no completion outside ``mcz``."""
    if len(mcz) == 0:
        return []
    codes = data.codes
    pats = mcz.patterns
    # only records compatible with some pattern on their observed cells can be trapped
    compat = ((codes[:, None, :] == pats[None]) | (pats[None] == -1)
              | (codes[:, None, :] == MISSING)).all(axis=2).any(axis=1)
    bad = []
    for i in np.flatnonzero(compat):
        _, fills = allowed_completions(codes[i], data.schema.d, mcz)
        if fills.shape[0] == 0:
            bad.append(int(i))
    return bad


def impute_missing_truncated(state: DpmpmState, data: CategoricalDataset,
                             mcz: DisallowedPatternSet, rng: np.random.Generator | None = None,
                             max_attempts: int = MAX_ATTEMPTS) -> np.ndarray:
    """Redraw missing cells from each record's class pmfs restricted to allowed combinations.

    Rejection first; records still rejected after ``max_attempts`` proposals
    are completed by exact enumeration of their allowed fillings.
    """
    if len(mcz) == 0:
        return impute_missing_cells(state, data)
    rng = state.rng if rng is None else rng
    miss = data.codes == MISSING
    pending = np.flatnonzero(miss.any(axis=1))
    completed = state.completed.copy()
    cums = [np.cumsum(th, axis=1) for th in state.theta]
    attempts = 0
    while pending.size and attempts < max_attempts:
        for j in range(data.p):
            rows = pending[miss[pending, j]]
            if rows.size:
                completed[rows, j] = _draw_index(cums[j][state.z[rows]], rng.random(rows.size))
        pending = pending[mcz.matches(completed[pending])]
        attempts += 1
    d = data.schema.d
    for i in pending:
        cols, fills = allowed_completions(data.codes[i], d, mcz)
        if fills.shape[0] == 0:
            raise DataError(f"record {int(i)} has no completion outside the structural zeros")
        k = state.z[i]
        w = np.ones(fills.shape[0])
        for c, j in enumerate(cols):
            w *= state.theta[j][k, fills[:, c]]
        if w.sum() <= 0:
            w = np.ones(fills.shape[0])
        pick = _draw_index(np.cumsum(w)[None, :], rng.random(1))[0]
        completed[i, cols] = fills[pick]
    state.completed = completed
    return completed


def gibbs_step_truncated(state: DpmpmState, data: CategoricalDataset, mcz: DisallowedPatternSet,
                         hp: HyperParams, nmax: int,
                         max_attempts: int = MAX_ATTEMPTS) -> DpmpmState:
    """One sweep of the structural-zeros sampler.

    Order: z (given the completed records), augmented sample, (V, pi), alpha,
    theta, truncated imputation.  Every update is a full conditional.  With
    no patterns this is exactly ``gibbs_step``.
    """
    if len(mcz) == 0:
        state.aug = _empty_aug(data.p)
        return gibbs_step(state, data, hp)
    sample_z(state, data, codes=state.completed)
    state.aug = draw_augmented(state, mcz, data.n, nmax)
    if state.aug.cap_hit:
        log.warning("iteration %d: augmented sample reached Nmax=%d", state.iteration + 1, nmax)
    sample_V_and_pi(state)
    sample_alpha(state, hp)
    sample_theta(state, data)
    impute_missing_truncated(state, data, mcz, max_attempts=max_attempts)
    state.iteration += 1
    return state
