"""End-to-end imputation and synthesis drivers."""

from __future__ import annotations

import json
import logging
import os
from typing import Sequence, TextIO

import numpy as np

from .catdata import CategoricalDataset, DisallowedPatternSet, write_csv
from .errors import ConfigurationError, DataError, DpmpmError
from .sampler import (
    DpmpmState,
    HyperParams,
    RunOutput,
    _draw_index,
    class_log_weights,
    init_state,
    run,
)
from .truncation import gibbs_step_truncated, impute_missing_truncated, inconsistent_records

log = logging.getLogger(__name__)


def _streams(seed: int, m: int) -> tuple[np.random.Generator, list[np.random.Generator]]:
    chain, extra = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(chain), [np.random.default_rng(s) for s in extra.spawn(m)]


def _hyper(K, aalpha, balpha, dirichlet_a=None, fixed_alpha=None) -> HyperParams:
    return HyperParams(K=K, a_alpha=aalpha, b_alpha=balpha, dirichlet_a=dirichlet_a,
                       fixed_alpha=fixed_alpha)


def _assert_observed_kept(result: RunOutput, X: CategoricalDataset) -> None:
    obs = ~X.missing
    for l, ds in enumerate(result.datasets):
        if not np.array_equal(ds.codes[obs], X.codes[obs]):
            raise DpmpmError(f"output dataset {l + 1} altered observed cells")


def impute_nozeros(X: CategoricalDataset, nrun: int, burn: int, thin: int, K: int,
                   aalpha: float, balpha: float, m: int, seed: int, silent: bool = True,
                   dirichlet_a=None, stream: TextIO | None = None) -> RunOutput:
    """Multiple imputation with the unrestricted model."""
    hp = _hyper(K, aalpha, balpha, dirichlet_a)
    rng, _ = _streams(seed, m)
    if X.n_missing == 0:
        log.warning("input has no missing cells; imputations will equal the input")
    state = init_state(X, hp, rng)
    result = run(state, X, hp, nrun, burn, thin, m, silent=silent, stream=stream)
    if X.n_missing == 0:
        result.warnings.append("input has no missing cells")
    _assert_observed_kept(result, X)
    return result


def impute_zeros(X: CategoricalDataset, MCZ: DisallowedPatternSet, Nmax: int, nrun: int,
                 burn: int, thin: int, K: int, aalpha: float, balpha: float, m: int,
                 seed: int, silent: bool = True, dirichlet_a=None,
                 stream: TextIO | None = None) -> RunOutput:
    """Multiple imputation under structural zeros."""
    if len(MCZ) == 0:
        raise ConfigurationError("the structural-zeros engine needs at least one pattern")
    if MCZ.schema != X.schema:
        raise ConfigurationError("MCZ schema differs from the data schema")
    if Nmax < 1:
        raise ConfigurationError(f"Nmax must be positive, got {Nmax}")
    bad = inconsistent_records(X, MCZ)
    if bad:
        shown = ", ".join(str(i) for i in bad[:20])
        raise DataError(f"{len(bad)} record(s) cannot avoid the structural zeros: {shown}")
    hp = _hyper(K, aalpha, balpha, dirichlet_a)
    rng, _ = _streams(seed, m)
    state = init_state(X, hp, rng)
    impute_missing_truncated(state, X, MCZ)
    cap_hits: list[int] = []

    def step(s: DpmpmState) -> DpmpmState:
        gibbs_step_truncated(s, X, MCZ, hp, Nmax)
        if s.aug.cap_hit:
            cap_hits.append(s.iteration)
        return s

    result = run(state, X, hp, nrun, burn, thin, m, silent=silent, step=step, stream=stream,
                 label="with structural zeros")
    if cap_hits:
        result.warnings.append(
            f"augmented sample hit Nmax={Nmax} at {len(cap_hits)} iteration(s), "
            f"first at {cap_hits[0]}")
    _assert_observed_kept(result, X)
    for l, ds in enumerate(result.datasets):
        if MCZ.matches(ds.codes).any():
            raise DpmpmError(f"imputed dataset {l + 1} contains a structural zero")
    return result


def synthesize(X: CategoricalDataset, nrun: int, burn: int, thin: int, K: int, aalpha: float,
               balpha: float, m: int, vars: Sequence[str] | None, seed: int,
               silent: bool = True, dirichlet_a=None, stream: TextIO | None = None) -> RunOutput:
    """Partially (or, with every column in ``vars``, fully) synthetic data.

    At each retained iteration every record's class is redrawn given its full
    record, then the ``vars`` columns are redrawn from that class's pmfs.
    ``vars=None`` synthesizes every column.
    """
    if X.n_missing:
        raise DataError(f"synthesis needs fully observed data; found {X.n_missing} missing cells")
    names = X.schema.names if vars is None else list(vars)
    for v in names:
        if v not in X.schema.names:
            raise ConfigurationError(f"unknown variable {v!r} in vars")
    cols = [X.schema.index(v) for v in names]
    hp = _hyper(K, aalpha, balpha, dirichlet_a)
    rng, subs = _streams(seed, m)
    state = init_state(X, hp, rng)

    def collect(s: DpmpmState, l: int) -> CategoricalDataset:
        if not cols:
            return X
        r = subs[l]
        lw = class_log_weights(s, X.codes)
        lw -= lw.max(axis=1, keepdims=True)
        z = _draw_index(np.cumsum(np.exp(lw), axis=1), r.random(X.n))
        codes = X.codes.copy()
        for j in cols:
            codes[:, j] = _draw_index(np.cumsum(s.theta[j], axis=1)[z], r.random(X.n))
        return X.with_codes(codes)

    result = run(state, X, hp, nrun, burn, thin, m, silent=silent, collect=collect, stream=stream)
    keep = [j for j in range(X.p) if j not in cols]
    for l, ds in enumerate(result.datasets):
        if not np.array_equal(ds.codes[:, keep], X.codes[:, keep]):
            raise DpmpmError(f"synthetic dataset {l + 1} altered an unsynthesized column")
    return result


def output_paths(prefix: str, kind: str, m: int) -> list[str]:
    tag = {"impute": "imp", "synthesize": "syn"}[kind]
    return [f"{prefix}_{tag}{k}.csv" for k in range(1, m + 1)]


def write_outputs(result: RunOutput, prefix: str, kind: str, settings: dict,
                  missing_token: str = "NA", runtime: bool = False) -> list[str]:
    """Write datasets, trace and report; returns the written paths."""
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    paths = output_paths(prefix, kind, len(result.datasets))
    for ds, path in zip(result.datasets, paths):
        write_csv(ds, path, missing_token)
    trace_path = f"{prefix}_trace.csv"
    result.trace.write_csv(trace_path)
    report = {
        "kind": kind,
        "settings": settings,
        "seed": settings.get("seed"),
        "dj": result.origdata.schema.d.tolist(),
        "selected_iterations": [result.trace.kept[c - 1] for c in result.selected],
        "kept": len(result.trace),
        "warnings": result.warnings,
        "outputs": [os.path.basename(p) for p in paths],
    }
    if runtime:
        report["runtime_seconds"] = result.runtime
    report_path = f"{prefix}_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths + [trace_path, report_path]
