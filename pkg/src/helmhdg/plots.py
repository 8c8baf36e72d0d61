"""Minimal static SVG line charts."""
from __future__ import annotations

import math
from html import escape

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=170, top=40, bottom=50)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]

CONVERGENCE_SERIES = [
    ("err_u_uh", "||u-u_h||"),
    ("err_u_nu", "||u-nu_h||"),
    ("err_grad_u_nu", "||grad(u-nu_h)||"),
    ("err_q_qh", "||q-q_h||"),
    ("triple_norm", "triple norm"),
    ("eta", "eta"),
]


def _finite_positive(v):
    return v is not None and math.isfinite(v) and v > 0


def _ticks(lo, hi):
    return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1) if lo - 1e-9 <= e <= hi + 1e-9]


def line_chart(series, title, xlabel, ylabel, logx=True, logy=True) -> str:
    """series: list of (label, xs, ys).  Non-finite or (on log axes) non-positive points are skipped."""

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    def ok(x, y):
        return (_finite_positive(x) if logx else math.isfinite(x)) and (_finite_positive(y) if logy else math.isfinite(y))

    clean = [(lab, [(tx(x), ty(y)) for x, y in zip(xs, ys) if ok(x, y)]) for lab, xs, ys in series]
    pts = [p for _, ps in clean for p in ps]
    if pts:
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for val in (_ticks(x0, x1) if logx else []):
        X = px(math.log10(val))
        parts.append(f'<line x1="{X:.1f}" y1="{MARGIN["top"]}" x2="{X:.1f}" y2="{MARGIN["top"] + ph}" stroke="#ddd"/>')
        parts.append(f'<text x="{X:.1f}" y="{MARGIN["top"] + ph + 16}" text-anchor="middle">{val:g}</text>')
    yt = _ticks(y0, y1) if logy else [y0 + (y1 - y0) * i / 4 for i in range(5)]
    for val in yt:
        Y = py(math.log10(val)) if logy else py(val)
        parts.append(f'<line x1="{MARGIN["left"]}" y1="{Y:.1f}" x2="{MARGIN["left"] + pw}" y2="{Y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{MARGIN["left"] - 6}" y="{Y + 4:.1f}" text-anchor="end">{val:.3g}</text>')
    parts.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text transform="translate(18,{MARGIN["top"] + ph / 2:.1f}) rotate(-90)" text-anchor="middle">{escape(ylabel)}</text>'
    )
    for i, (label, ps) in enumerate(clean):
        color = COLORS[i % len(COLORS)]
        if ps:
            path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in ps)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"/>')
            for x, y in ps:
                parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{color}"/>')
        ly = MARGIN["top"] + 14 + 18 * i
        lx = MARGIN["left"] + pw + 12
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 26}" y="{ly}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def convergence_svg(records, title="") -> str:
    xs = [math.sqrt(r.nel) for r in records]
    series = [(label, xs, [getattr(r, col) for r in records]) for col, label in CONVERGENCE_SERIES]
    return line_chart(series, title, "Nel^(1/2)", "error / estimator")


def effectivity_svg(records, title="") -> str:
    xs = [float(r.nel) for r in records]
    return line_chart([("effectivity", xs, [r.effectivity for r in records])], title, "Nel", "eta / triple norm", logy=False)
