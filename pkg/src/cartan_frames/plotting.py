"""Minimal deterministic SVG line plots."""
import numpy as np

from .errors import EmptySeries

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=50)
N_TICKS = 5


def _fmt(v):
    return f"{v:.2f}"


def _label(v):
    s = f"{v:.6g}"
    return "0" if s == "-0" else s


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def _range(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    # spread below label precision is drawn as a constant
    if _label(lo) == _label(hi):
        pad = 0.1 * abs(lo) if lo != 0 else 1.0
        return lo - pad, hi + pad
    return lo, hi


def emit_plot(x, y, title="", xlabel="s", ylabel="k"):
    """Render ``y`` against ``x`` as a standalone SVG string.

    NaN samples break the polyline.  Output depends only on the input
    values, so identical series give byte-identical documents.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    ok = np.isfinite(x) & np.isfinite(y)
    if not np.any(ok):
        raise EmptySeries("nothing to plot")

    x0, x1 = _range(x[ok])
    y0, y1 = _range(y[ok])
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{_esc(title)}</text>',
    ]
    left, bottom = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{WIDTH - MARGIN["right"]}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for t in np.linspace(x0, x1, N_TICKS):
        X = _fmt(px(t))
        out.append(f'<line x1="{X}" y1="{bottom}" x2="{X}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{bottom + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{_label(t)}</text>')
    for t in np.linspace(y0, y1, N_TICKS):
        Y = _fmt(py(t))
        out.append(f'<line x1="{left - 5}" y1="{Y}" x2="{left}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle" '
                   f'font-family="sans-serif" font-size="11">{_label(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.2f})">{_esc(ylabel)}</text>')

    # contiguous runs of finite samples
    idx = np.flatnonzero(ok)
    breaks = np.flatnonzero(np.diff(idx) > 1) + 1
    for run in np.split(idx, breaks):
        pts = " ".join(f"{_fmt(px(x[i]))},{_fmt(py(y[i]))}" for i in run)
        out.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
