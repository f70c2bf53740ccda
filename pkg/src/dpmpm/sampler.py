"""Blocked Gibbs sampler for the truncated DP mixture of products of multinomials.

The model, for records ``i`` and variables ``j``::

    z_i | pi            ~ Categorical(pi)
    X_ij | z_i, theta   ~ Categorical(theta[j][z_i])
    pi_k = V_k * prod_{l<k} (1 - V_l),   V_k ~ Beta(1, alpha),  V_K = 1
    alpha ~ Gamma(a_alpha, rate=b_alpha)
    theta[j][k] ~ Dirichlet(a^(j))

All categorical draws use inverse-CDF on uniforms, scanning classes or levels
in ascending order.
"""

from __future__ import annotations

import csv
import io
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np

from .catdata import MISSING, CategoricalDataset
from .errors import ConfigurationError, ContractViolation, DpmpmError

ALPHA_V_CLAMP = 1.0 - 1e-14


@dataclass
class HyperParams:
    """Prior settings.

    ``dirichlet_a`` holds one vector per variable; ``None`` means all ones.
    ``fixed_alpha`` pins the concentration parameter and skips its update,
    which the brute-force posterior checks rely on.
    """

    K: int
    a_alpha: float = 0.25
    b_alpha: float = 0.25
    dirichlet_a: list[np.ndarray] | None = None
    fixed_alpha: float | None = None

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ConfigurationError(f"K must be a positive integer, got {self.K}")
        self.K = int(self.K)
        if not (self.a_alpha > 0 and self.b_alpha > 0):
            raise ConfigurationError("a_alpha and b_alpha must be positive")
        if self.fixed_alpha is not None and not self.fixed_alpha > 0:
            raise ConfigurationError("fixed_alpha must be positive")
        if self.dirichlet_a is not None:
            self.dirichlet_a = [np.asarray(a, dtype=np.float64) for a in self.dirichlet_a]
            if any((a <= 0).any() for a in self.dirichlet_a):
                raise ConfigurationError("Dirichlet hyperparameters must be positive")

    def prior_a(self, d: Sequence[int]) -> list[np.ndarray]:
        if self.dirichlet_a is None:
            return [np.ones(int(dj)) for dj in d]
        if [a.size for a in self.dirichlet_a] != [int(dj) for dj in d]:
            raise ConfigurationError("Dirichlet hyperparameter sizes do not match the schema")
        return self.dirichlet_a


@dataclass
class AugmentedSample:
    """Records drawn inside the structural zeros, with their classes."""

    records: np.ndarray
    z: np.ndarray
    cap_hit: bool = False

    @property
    def nmis(self) -> int:
        return int(self.records.shape[0])


@dataclass
class DpmpmState:
    z: np.ndarray
    V: np.ndarray
    pi: np.ndarray
    alpha: float
    theta: list[np.ndarray]
    completed: np.ndarray
    rng: np.random.Generator
    a: list[np.ndarray]
    aug: AugmentedSample | None = None
    iteration: int = 0

    @property
    def K(self) -> int:
        return self.pi.size

    @property
    def kstar(self) -> int:
        return int(np.unique(self.z).size)

    @property
    def nmis(self) -> int:
        return 0 if self.aug is None else self.aug.nmis

    def completed_dataset(self, data: CategoricalDataset) -> CategoricalDataset:
        return data.with_codes(self.completed)

    def check(self, data: CategoricalDataset) -> None:
        """Assert the structural invariants; raises ``DpmpmError`` on failure."""
        if abs(self.pi.sum() - 1.0) > 1e-12 or (self.pi < 0).any():
            raise DpmpmError("pi is not a probability vector")
        if not np.array_equal(self.pi, stick_breaking(self.V)):
            raise DpmpmError("pi is not the stick-breaking image of V")
        for th in self.theta:
            if np.abs(th.sum(axis=1) - 1.0).max() > 1e-12:
                raise DpmpmError("theta row does not sum to one")
        obs = data.codes != MISSING
        if not np.array_equal(self.completed[obs], data.codes[obs]):
            raise DpmpmError("completed data disagrees with observed cells")


@dataclass
class TraceLog:
    kept: list[int] = field(default_factory=list)
    alpha_trace: list[float] = field(default_factory=list)
    kstar_trace: list[int] = field(default_factory=list)
    nmis_trace: list[int] = field(default_factory=list)

    def record(self, t: int, state: DpmpmState) -> None:
        self.kept.append(t)
        self.alpha_trace.append(float(state.alpha))
        self.kstar_trace.append(state.kstar)
        self.nmis_trace.append(state.nmis)

    def __len__(self) -> int:
        return len(self.kept)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "kstar", "alpha", "nmis"])
        for row in zip(self.kept, self.kstar_trace, self.alpha_trace, self.nmis_trace):
            writer.writerow([row[0], row[1], repr(row[2]), row[3]])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "TraceLog":
        out = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                out.kept.append(int(row["iter"]))
                out.kstar_trace.append(int(row["kstar"]))
                out.alpha_trace.append(float(row["alpha"]))
                out.nmis_trace.append(int(row.get("nmis") or 0))
        return out


@dataclass
class RunOutput:
    datasets: list[CategoricalDataset]
    origdata: CategoricalDataset
    trace: TraceLog
    warnings: list[str] = field(default_factory=list)
    selected: list[int] = field(default_factory=list)
    runtime: float = 0.0


def stick_breaking(V: np.ndarray) -> np.ndarray:
    """Mixture weights ``pi_k = V_k * prod_{l<k}(1 - V_l)``; requires ``V[-1] == 1``."""
    V = np.asarray(V, dtype=np.float64)
    if V.size == 0 or V[-1] != 1.0:
        raise ContractViolation("the last stick fraction must equal 1")
    if (V < 0).any() or (V > 1).any():
        raise ContractViolation("stick fractions must lie in [0, 1]")
    remaining = np.concatenate(([1.0], np.cumprod(1.0 - V[:-1])))
    return V * remaining


def _draw_index(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse-CDF draw; ``cum`` is ``(n, K)`` unnormalized cumulative mass."""
    u = u * cum[:, -1]
    return np.minimum((cum <= u[:, None]).sum(axis=1), cum.shape[1] - 1)


def _dirichlet_rows(rng: np.random.Generator, shape: np.ndarray) -> np.ndarray:
    g = rng.standard_gamma(shape)
    s = g.sum(axis=1, keepdims=True)
    bad = s[:, 0] <= 0
    if bad.any():
        # every gamma underflowed: fall back to a point mass at the largest shape
        g[bad] = 0.0
        g[bad, np.argmax(shape[bad], axis=1)] = 1.0
        s = g.sum(axis=1, keepdims=True)
    return g / s


def class_log_weights(state: DpmpmState, codes: np.ndarray) -> np.ndarray:
    """``(n, K)`` array of ``log pi_k + sum_j log theta[j][k, x_ij]``; MISSING cells are skipped."""
    with np.errstate(divide="ignore"):
        out = np.broadcast_to(np.log(state.pi), (codes.shape[0], state.K)).copy()
        for j, th in enumerate(state.theta):
            # trailing zero column absorbs MISSING (= -1) codes
            lt = np.concatenate((np.log(th.T), np.zeros((1, state.K))), axis=0)
            out += lt[codes[:, j]]
    return out


def sample_z(state: DpmpmState, data: CategoricalDataset, codes: np.ndarray | None = None) -> np.ndarray:
    """Draw every class label from its conditional given the record's observed cells.

    Pass ``codes`` to condition on some other table (e.g. the current
    completed data).
    """
    codes = data.codes if codes is None else codes
    lw = class_log_weights(state, codes)
    lw -= lw.max(axis=1, keepdims=True)
    if not np.isfinite(lw).any(axis=1).all():
        raise DpmpmError("class probabilities are all zero for some record")
    cum = np.cumsum(np.exp(lw), axis=1)
    state.z = _draw_index(cum, state.rng.random(codes.shape[0]))
    return state.z


def class_counts(state: DpmpmState) -> np.ndarray:
    n_k = np.bincount(state.z, minlength=state.K)
    if state.aug is not None and state.aug.nmis:
        n_k = n_k + np.bincount(state.aug.z, minlength=state.K)
    return n_k


def level_counts(state: DpmpmState, j: int) -> np.ndarray:
    """``(K, d_j)`` counts of completed (plus augmented) cells by class and level."""
    d = state.theta[j].shape[1]
    c = np.bincount(state.z * d + state.completed[:, j], minlength=state.K * d)
    if state.aug is not None and state.aug.nmis:
        c = c + np.bincount(state.aug.z * d + state.aug.records[:, j], minlength=state.K * d)
    return c.reshape(state.K, d)


def sample_theta(state: DpmpmState, data: CategoricalDataset | None = None) -> list[np.ndarray]:
    """Conjugate Dirichlet update of every class/variable pmf."""
    state.theta = [_dirichlet_rows(state.rng, state.a[j][None, :] + level_counts(state, j))
                   for j in range(len(state.theta))]
    return state.theta


def sample_V_and_pi(state: DpmpmState) -> tuple[np.ndarray, np.ndarray]:
    K = state.K
    if K > 1:
        n_k = class_counts(state)
        tail = np.cumsum(n_k[::-1])[::-1]
        beyond = np.concatenate((tail[1:], [0]))
        V = np.ones(K)
        V[:-1] = state.rng.beta(1.0 + n_k[:-1], state.alpha + beyond[:-1])
        state.V = V
    else:
        state.V = np.ones(1)
    state.pi = stick_breaking(state.V)
    return state.V, state.pi


def alpha_conditional(V: np.ndarray, a_alpha: float, b_alpha: float) -> tuple[float, float]:
    """Shape and rate of the Gamma full conditional of alpha."""
    Vc = np.minimum(np.asarray(V[:-1], dtype=np.float64), ALPHA_V_CLAMP)
    return a_alpha + V.size - 1, b_alpha - float(np.log1p(-Vc).sum())


def sample_alpha(state: DpmpmState, hp: HyperParams) -> float:
    if hp.fixed_alpha is not None:
        state.alpha = float(hp.fixed_alpha)
        return state.alpha
    shape, rate = alpha_conditional(state.V, hp.a_alpha, hp.b_alpha)
    state.alpha = float(state.rng.gamma(shape, 1.0 / rate))
    return state.alpha


def impute_missing_cells(state: DpmpmState, data: CategoricalDataset) -> np.ndarray:
    """Redraw each missing cell from its class's pmf; observed cells are untouched."""
    miss = data.codes == MISSING
    if not miss.any():
        return state.completed
    completed = state.completed.copy()
    for j, th in enumerate(state.theta):
        rows = np.flatnonzero(miss[:, j])
        if rows.size == 0:
            continue
        cum = np.cumsum(th, axis=1)[state.z[rows]]
        completed[rows, j] = _draw_index(cum, state.rng.random(rows.size))
    state.completed = completed
    return completed


def init_state(data: CategoricalDataset, hp: HyperParams, seed: int | np.random.Generator) -> DpmpmState:
    if data.n == 0:
        raise ConfigurationError("cannot initialise a sampler on an empty dataset")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    K = hp.K
    alpha = 1.0 if hp.fixed_alpha is None else float(hp.fixed_alpha)
    V = np.ones(K)
    if K > 1:
        V[:-1] = rng.beta(1.0, alpha, size=K - 1)
    a = hp.prior_a(data.schema.d)
    theta = [_dirichlet_rows(rng, np.broadcast_to(aj, (K, aj.size)).copy()) for aj in a]
    z = rng.integers(0, K, size=data.n) if K > 1 else np.zeros(data.n, dtype=np.int64)
    state = DpmpmState(z=z.astype(np.int64), V=V, pi=stick_breaking(V), alpha=alpha,
                       theta=theta, completed=data.codes.copy(), rng=rng, a=a)
    impute_missing_cells(state, data)
    return state


def gibbs_step(state: DpmpmState, data: CategoricalDataset, hp: HyperParams) -> DpmpmState:
    """One sweep: z, missing cells, (V, pi), alpha, theta.

    The missing cells are redrawn straight after z because z is drawn with
    them integrated out; the pair is then a joint draw given the parameters.
    """
    sample_z(state, data)
    impute_missing_cells(state, data)
    sample_V_and_pi(state)
    sample_alpha(state, hp)
    sample_theta(state, data)
    state.iteration += 1
    return state


def candidate_count(nrun: int, burn: int, thin: int) -> int:
    return (nrun - burn) // thin


def check_run_config(nrun: int, burn: int, thin: int, m: int) -> int:
    if nrun < 1 or burn < 0 or burn >= nrun:
        raise ConfigurationError(f"need 0 <= burn < nrun (got burn={burn}, nrun={nrun})")
    if thin < 1:
        raise ConfigurationError(f"thin must be >= 1 (got {thin})")
    if m < 1:
        raise ConfigurationError(f"m must be >= 1 (got {m})")
    c = candidate_count(nrun, burn, thin)
    if m > c:
        raise ConfigurationError(
            f"m={m} exceeds the {c} kept iterations available for nrun={nrun}, "
            f"burn={burn}, thin={thin}")
    return c


def selected_candidates(nrun: int, burn: int, thin: int, m: int) -> list[int]:
    """1-based candidate ordinals of the m retained datasets, evenly spaced, last included."""
    c = check_run_config(nrun, burn, thin, m)
    return [(i * c) // m for i in range(1, m + 1)]


def progress_line(t: int, state: DpmpmState) -> str:
    return f"iter = {t}  kstar = {state.kstar} alpha = {state.alpha:.6g} Nmis = {state.nmis}"


def run(state: DpmpmState, data: CategoricalDataset, hp: HyperParams, nrun: int, burn: int,
        thin: int, m: int, silent: bool = True,
        step: Callable[[DpmpmState], DpmpmState] | None = None,
        collect: Callable[[DpmpmState, int], CategoricalDataset] | None = None,
        stream: TextIO | None = None, label: str = "without structural zeros") -> RunOutput:
    """Run ``nrun`` sweeps and keep ``m`` datasets from the thinned post-burn-in chain.

    Candidates are sweeps ``t > burn`` with ``(t - burn) % thin == 0``; every
    candidate is traced and the datasets come from evenly spaced candidates.
    ``collect(state, l)`` produces the l-th output dataset (default: the
    current completed data).
    """
    chosen = selected_candidates(nrun, burn, thin, m)
    if step is None:
        def step(s):
            return gibbs_step(s, data, hp)
    if collect is None:
        def collect(s, l):
            return s.completed_dataset(data)
    out = sys.stdout if stream is None else stream
    if not silent:
        print("Initializing...", file=out)
        print(f"Run model {label}.", file=out)
        print(progress_line(0, state), file=out)
    trace = TraceLog()
    datasets = []
    wanted = set(chosen)
    started = time.perf_counter()
    for t in range(1, nrun + 1):
        step(state)
        if not silent:
            print(progress_line(t, state), file=out)
        if t > burn and (t - burn) % thin == 0:
            trace.record(t, state)
            if len(trace) in wanted:
                datasets.append(collect(state, len(datasets)))
    result = RunOutput(datasets=datasets, origdata=data, trace=trace, selected=chosen,
                       runtime=time.perf_counter() - started)
    if trace.kstar_trace and max(trace.kstar_trace) == state.K:
        result.warnings.append(
            f"kstar reached K={state.K} at a kept iteration; consider re-running with a larger K")
    return result
