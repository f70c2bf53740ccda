"""Chain diagnostics and utility comparisons, emitted as CSV and static SVG."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .catdata import MISSING, CategoricalDataset
from .errors import ConfigurationError, DataError
from .sampler import TraceLog, candidate_count

WIDTH, HEIGHT = 800, 500
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 30, 50, 70
_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass
class ACF:
    values: np.ndarray
    zero_variance: bool = False

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.values.size)


def acf(series: Sequence[float], max_lag: int | None = None) -> ACF:
    """Sample autocorrelation ``r_h`` for ``h = 0..max_lag``.

    ``max_lag`` defaults to ``min(40, len(series) // 2)``.  A constant series
    gives ``r_0 = 1`` and zeros elsewhere, flagged ``zero_variance``.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if max_lag is None:
        max_lag = min(40, n // 2)
    if not 1 <= max_lag < n:
        raise ConfigurationError(f"need 1 <= max_lag < len(series); got {max_lag}, {n}")
    xc = x - x.mean()
    denom = float(xc @ xc)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if denom == 0.0:
        return ACF(out, zero_variance=True)
    for h in range(1, max_lag + 1):
        out[h] = float(xc[:-h] @ xc[h:]) / denom
    return ACF(out)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, count)


def _tick_label(v: float) -> str:
    if abs(v - round(v)) < 1e-9:
        return str(int(round(v)))
    return f"{v:.3g}"


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xlim, ylim):
        self.parts: list[str] = []
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def px(self, x: float) -> float:
        return _LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - _LEFT - _RIGHT)

    def py(self, y: float) -> float:
        return HEIGHT - _BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - _TOP - _BOTTOM)

    def axes(self, xticks: bool = True) -> None:
        p = self.parts
        left, bottom = _LEFT, HEIGHT - _BOTTOM
        p.append(f'<line class="axis" x1="{left}" y1="{bottom}" x2="{WIDTH - _RIGHT}" '
                 f'y2="{bottom}" stroke="black"/>')
        p.append(f'<line class="axis" x1="{left}" y1="{_TOP}" x2="{left}" y2="{bottom}" '
                 'stroke="black"/>')
        for v in _nice_ticks(self.y0, self.y1):
            y = self.py(v)
            p.append(f'<line x1="{left - 5}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
            p.append(f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="12">'
                     f'{_tick_label(v)}</text>')
        if xticks:
            for v in _nice_ticks(self.x0, self.x1):
                x = self.px(v)
                p.append(f'<line x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" y2="{bottom + 5}" '
                         'stroke="black"/>')
                p.append(f'<text x="{_fmt(x)}" y="{bottom + 20}" text-anchor="middle" '
                         f'font-size="12">{_tick_label(v)}</text>')
        p.append(f'<text x="{WIDTH / 2:.0f}" y="{_TOP - 20}" text-anchor="middle" font-size="16">'
                 f'{escape(self.title)}</text>')
        p.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 20}" text-anchor="middle" '
                 f'font-size="13">{escape(self.xlabel)}</text>')
        p.append(f'<text x="18" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="13" '
                 f'transform="rotate(-90 18 {HEIGHT / 2:.0f})">{escape(self.ylabel)}</text>')

    def render(self) -> str:
        head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
                f'width="{WIDTH}" height="{HEIGHT}">\n'
                f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
        return head + "\n".join(self.parts) + "\n</svg>\n"


def trace_svg(x: Sequence[float], y: Sequence[float], title: str = "Traceplot of kstar",
              ylabel: str = "kstar") -> str:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lo, hi = float(y.min()), float(y.max())
    pad = max(1.0, 0.05 * (hi - lo))
    c = _Canvas(title, "iteration", ylabel, (float(x.min()), float(x.max())), (lo - pad, hi + pad))
    c.axes()
    pts = " ".join(f"{_fmt(c.px(a))},{_fmt(c.py(b))}" for a, b in zip(x, y))
    c.parts.append(f'<polyline class="trace" data-points="{len(x)}" fill="none" '
                   f'stroke="{_PALETTE[0]}" stroke-width="1.5" points="{pts}"/>')
    return c.render()


def acf_svg(values: Sequence[float], title: str = "Autocorrelation of kstar") -> str:
    v = np.asarray(values, dtype=np.float64)
    c = _Canvas(title, "lag", "autocorrelation", (0.0, float(max(v.size - 1, 1))),
                (min(-0.2, float(v.min())), 1.0))
    c.axes()
    zero = c.py(0.0)
    c.parts.append(f'<line x1="{_LEFT}" y1="{_fmt(zero)}" x2="{WIDTH - _RIGHT}" '
                   f'y2="{_fmt(zero)}" stroke="#999999"/>')
    for h, r in enumerate(v):
        x = c.px(h)
        c.parts.append(f'<line class="acf" data-lag="{h}" x1="{_fmt(x)}" y1="{_fmt(zero)}" '
                       f'x2="{_fmt(x)}" y2="{_fmt(c.py(r))}" stroke="{_PALETTE[0]}" '
                       'stroke-width="4"/>')
    return c.render()


def grouped_bar_svg(levels: Sequence[str], series: Sequence[tuple[str, Sequence[float]]],
                    title: str, ylabel: str = "percentage") -> str:
    """One group per level, one bar per series; the first series is tagged observed."""
    top = max([float(np.max(vals)) for _, vals in series] + [1.0])
    c = _Canvas(title, "level", ylabel, (0.0, float(len(levels))), (0.0, top * 1.05))
    c.axes(xticks=False)
    nser = len(series)
    group_w = (WIDTH - _LEFT - _RIGHT) / max(len(levels), 1)
    bar_w = 0.8 * group_w / max(nser, 1)
    base = c.py(0.0)
    for s, (name, vals) in enumerate(series):
        tag = "observed" if s == 0 else escape(name)
        color = "#000000" if s == 0 else _PALETTE[(s - 1) % len(_PALETTE)]
        c.parts.append(f'<g series="{tag}" fill="{color}">')
        for g, val in enumerate(vals):
            x = _LEFT + g * group_w + 0.1 * group_w + s * bar_w
            y = c.py(float(val))
            c.parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar_w)}" '
                           f'height="{_fmt(base - y)}"/>')
        c.parts.append("</g>")
    for g, lev in enumerate(levels):
        x = _LEFT + (g + 0.5) * group_w
        c.parts.append(f'<text x="{_fmt(x)}" y="{HEIGHT - _BOTTOM + 18}" text-anchor="middle" '
                       f'font-size="11">{escape(str(lev))}</text>')
    for s, (name, _) in enumerate(series):
        color = "#000000" if s == 0 else _PALETTE[(s - 1) % len(_PALETTE)]
        y = _TOP + 14 * s
        c.parts.append(f'<rect x="{WIDTH - _RIGHT - 110}" y="{y - 9}" width="10" height="10" '
                       f'fill="{color}"/>')
        c.parts.append(f'<text x="{WIDTH - _RIGHT - 95}" y="{y}" font-size="11">'
                       f'{escape(name)}</text>')
    return c.render()


def kstar_mcmc_diag(trace: TraceLog | Sequence[int], nrun: int | None = None,
                    burn: int | None = None, thin: int | None = None,
                    K: int | None = None, max_lag: int | None = None) -> dict:
    """Trace and autocorrelation plots of kstar plus a numeric summary.

    When ``nrun``, ``burn`` and ``thin`` are all given the trace length must
    equal ``(nrun - burn) // thin``.
    """
    if isinstance(trace, TraceLog):
        ks = np.asarray(trace.kstar_trace, dtype=np.float64)
        iters = np.asarray(trace.kept, dtype=np.float64)
    else:
        ks = np.asarray(trace, dtype=np.float64)
        iters = np.arange(1, ks.size + 1, dtype=np.float64)
    if ks.size < 2:
        raise ConfigurationError("kstar trace needs at least 2 points")
    if None not in (nrun, burn, thin):
        expect = candidate_count(nrun, burn, thin)
        if expect != ks.size:
            raise ConfigurationError(
                f"trace has {ks.size} points but nrun={nrun}, burn={burn}, thin={thin} "
                f"keeps {expect}")
    r = acf(ks, max_lag)
    summary = {"n": int(ks.size), "mean": float(ks.mean()), "min": int(ks.min()),
               "max": int(ks.max()), "zero_variance": r.zero_variance}
    if K is not None:
        summary["K"] = int(K)
        summary["kstar_at_K"] = bool(ks.max() >= K)
    trace_csv = "iter,kstar\n" + "".join(f"{int(a)},{int(b)}\n" for a, b in zip(iters, ks))
    acf_csv = "lag,acf\n" + "".join(f"{h},{v!r}\n" for h, v in enumerate(r.values.tolist()))
    return {
        "traceplot": trace_svg(iters, ks),
        "autocorrplot": acf_svg(r.values),
        "acf": r.values,
        "summary": summary,
        "trace_csv": trace_csv,
        "acf_csv": acf_csv,
    }


@dataclass
class Comparison:
    variable: str
    levels: list[str]
    columns: list[str]
    percentages: np.ndarray  # (n_levels, n_columns)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([self.variable] + self.columns)
        for lev, row in zip(self.levels, self.percentages):
            writer.writerow([lev] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_text(self, digits: int = 2) -> str:
        header = [self.variable] + self.columns
        body = [[lev] + [f"{v:.{digits}f}" for v in row]
                for lev, row in zip(self.levels, self.percentages)]
        widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
        return "\n".join(" ".join(cell.rjust(w) for cell, w in zip(r, widths))
                         for r in [header] + body) + "\n"


def _percentages(codes: np.ndarray, d: int) -> np.ndarray:
    obs = codes[codes != MISSING]
    if obs.size == 0:
        return np.zeros(d)
    return 100.0 * np.bincount(obs, minlength=d) / obs.size


def marginal_compare(obsdata: CategoricalDataset, completed: Sequence[CategoricalDataset],
                     var: str, mode: str = "imp") -> dict:
    """Marginal percentages of ``var``: observed cells first, then each completed dataset."""
    mode = mode.lower()
    if mode not in ("imp", "syn"):
        raise ConfigurationError(f"mode must be 'imp' or 'syn', got {mode!r}")
    j = obsdata.schema.index(var)
    d = int(obsdata.schema.d[j])
    levels = list(obsdata.schema.levels[j])
    cols = [_percentages(obsdata.codes[:, j], d)]
    names = ["observed"]
    for l, ds in enumerate(completed, start=1):
        if ds.schema.levels[ds.schema.index(var)] != tuple(levels):
            raise DataError(f"dataset {l} has different levels for {var!r}")
        cols.append(_percentages(ds.codes[:, ds.schema.index(var)], d))
        names.append(f"{mode}{l}")
    table = Comparison(var, levels, names, np.column_stack(cols))
    kind = "imputed" if mode == "imp" else "synthetic"
    svg = grouped_bar_svg(levels, list(zip(names, table.percentages.T)),
                          f"Marginal distribution of {var}: observed vs {kind}")
    return {"table": table, "svg": svg, "csv": table.to_csv()}
