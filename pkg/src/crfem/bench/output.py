"""CSV, JSON and SVG emission."""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .experiments import TABLE_COLUMNS


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else f"{x:.15g}"


def write_table_csv(path, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TABLE_COLUMNS)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in TABLE_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_table_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{c: (int(r[c]) if c == "k" else float(r[c])) for c in TABLE_COLUMNS} for r in rows]


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def write_records_json(path, payload):
    """Dump nested dicts/lists of :class:`AfemRecord` (converted via ``to_dict``)."""
    def conv(o):
        if hasattr(o, "to_dict"):
            return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in o.to_dict().items()}
        if isinstance(o, dict):
            return {str(k): conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(v) for v in o]
        return o

    path = Path(path)
    try:
        path.write_text(json.dumps(conv(payload), indent=1, default=_json_default))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# -- SVG -------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _decades(lo, hi):
    return list(range(int(math.floor(math.log10(lo))), int(math.ceil(math.log10(hi))) + 1))


def write_svg_loglog(path, series, title="", xlabel="N", ylabel="", ref_slopes=(-1.0, -0.5),
                     width=640, height=480):
    """Log-log line plot.

    ``series`` is a list of ``(label, x, y, dashed)`` tuples. Reference slope
    triangles are drawn for each entry of ``ref_slopes``.
    """
    ml, mr, mt, mb = 70, 170, 40, 55
    pw, ph = width - ml - mr, height - mt - mb
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ys = ys[ys > 0]
    xd = _decades(xs.min(), xs.max())
    yd = _decades(ys.min(), ys.max())
    x0, x1 = xd[0], max(xd[-1], xd[0] + 1)
    y0, y1 = yd[0], max(yd[-1], yd[0] + 1)

    def X(v):
        return ml + pw * (math.log10(v) - x0) / (x1 - x0)

    def Y(v):
        return mt + ph * (1 - (math.log10(v) - y0) / (y1 - y0))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for d in range(x0, x1 + 1):
        px = X(10.0 ** d)
        out.append(f'<line x1="{px:.1f}" y1="{mt}" x2="{px:.1f}" y2="{mt + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{px:.1f}" y="{mt + ph + 18}" text-anchor="middle">1e{d}</text>')
    for d in range(y0, y1 + 1):
        py = Y(10.0 ** d)
        out.append(f'<line x1="{ml}" y1="{py:.1f}" x2="{ml + pw}" y2="{py:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 6}" y="{py + 4:.1f}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="22" text-anchor="middle" font-size="14">{title}</text>')

    for i, (label, x, y, dashed) in enumerate(series):
        col = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(x, y) if b > 0)
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"{dash}/>')
        for a, b in zip(x, y):
            if b > 0:
                out.append(f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="2.5" fill="{col}"/>')
        ly = mt + 16 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 34}" y2="{ly}" stroke="{col}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{ml + pw + 40}" y="{ly + 4}">{label}</text>')

    # slope triangles anchored near the lower left of the data
    xa = 10 ** (math.log10(xs.min()) + 0.55 * (math.log10(xs.max()) - math.log10(xs.min())))
    for j, s in enumerate(ref_slopes):
        ya = 10 ** (y0 + 0.18 * (y1 - y0) + 0.12 * j * (y1 - y0))
        xb = xa * 10 ** 0.5
        yb = ya * 10 ** (0.5 * s)
        out.append(f'<polygon points="{X(xa):.2f},{Y(ya):.2f} {X(xb):.2f},{Y(yb):.2f} {X(xb):.2f},{Y(ya):.2f}" '
                   'fill="none" stroke="black" stroke-width="1"/>')
        out.append(f'<text x="{X(xb) + 4:.2f}" y="{(Y(ya) + Y(yb)) / 2:.2f}">slope {s:g}</text>')
    out.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_figure_svg(path, p, runs):
    ad, un = runs["adaptive"], runs["uniform"]
    series = [
        ("eta^2 adaptive", [r.n_dofs for r in ad], [r.eta2 for r in ad], False),
        ("rho^2 adaptive", [r.n_dofs for r in ad], [r.rho2 for r in ad], False),
    ]
    if un:
        series += [
            ("eta^2 uniform", [r.n_dofs for r in un], [r.eta2 for r in un], True),
            ("rho^2 uniform", [r.n_dofs for r in un], [r.rho2 for r in un], True),
        ]
    write_svg_loglog(path, series, title=f"p = {p:g}", xlabel="interior sides N_k", ylabel="squared error")
