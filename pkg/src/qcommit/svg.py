"""Tiny SVG writers for learning curves and histograms.

Output is plain text with fixed number formatting, so identical data
gives identical files.
"""
from __future__ import annotations

import numpy as np

W, H, PAD = 640, 360, 48
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _frame(title: str, xlabel: str, ylabel: str, lo: float, hi: float) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="14" y="{H / 2}" font-size="12" transform="rotate(-90 14 {H / 2})" '
        f'text-anchor="middle">{_esc(ylabel)}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end" font-size="10">{lo:.4g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 4}" text-anchor="end" font-size="10">{hi:.4g}</text>',
    ]


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _range(values) -> tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def line_plot(series: dict, title: str, xlabel: str = "episode", ylabel: str = "return") -> str:
    """One polyline per named series; x is the sample index."""
    series = {k: np.asarray(v, dtype=float) for k, v in series.items() if len(v)}
    if not series:
        return "\n".join(_frame(title, xlabel, ylabel, 0.0, 1.0) + ["</svg>"]) + "\n"
    lo, hi = _range(np.concatenate(list(series.values())))
    n = max(len(v) for v in series.values())
    out = _frame(title, xlabel, ylabel, lo, hi)
    out.append(f'<text x="{W - PAD}" y="{H - PAD + 14}" text-anchor="end" font-size="10">{n - 1}</text>')
    for i, (name, ys) in enumerate(series.items()):
        xs = PAD + (W - 2 * PAD) * np.arange(len(ys)) / max(n - 1, 1)
        yy = H - PAD - (H - 2 * PAD) * (ys - lo) / (hi - lo)
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, yy))
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD + 14 * i}" text-anchor="end" font-size="11" '
                   f'fill="{color}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram(samples: dict, title: str, xlabel: str = "MW", bins: int = 30) -> str:
    """Overlaid step histograms sharing one set of bin edges."""
    samples = {k: np.asarray(v, dtype=float).reshape(-1) for k, v in samples.items() if np.size(v)}
    if not samples:
        return "\n".join(_frame(title, xlabel, "count", 0.0, 1.0) + ["</svg>"]) + "\n"
    x_lo, x_hi = _range(np.concatenate(list(samples.values())))
    edges = np.linspace(x_lo, x_hi, bins + 1)
    counts = {k: np.histogram(v, edges)[0] for k, v in samples.items()}
    top = max(int(c.max()) for c in counts.values()) or 1
    out = _frame(title, xlabel, "count", 0.0, float(top))
    out.append(f'<text x="{PAD}" y="{H - PAD + 14}" text-anchor="middle" font-size="10">{x_lo:.4g}</text>')
    out.append(f'<text x="{W - PAD}" y="{H - PAD + 14}" text-anchor="middle" font-size="10">{x_hi:.4g}</text>')
    xs = PAD + (W - 2 * PAD) * (edges - x_lo) / (x_hi - x_lo)
    for i, (name, c) in enumerate(counts.items()):
        pts = [f"{_fmt(xs[0])},{_fmt(H - PAD)}"]
        for j, n in enumerate(c):
            y = H - PAD - (H - 2 * PAD) * n / top
            pts += [f"{_fmt(xs[j])},{_fmt(y)}", f"{_fmt(xs[j + 1])},{_fmt(y)}"]
        pts.append(f"{_fmt(xs[-1])},{_fmt(H - PAD)}")
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD + 14 * i}" text-anchor="end" font-size="11" '
                   f'fill="{color}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
