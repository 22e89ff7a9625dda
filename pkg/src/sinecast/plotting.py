"""Forecast plots as self-contained SVG files.

No plotting dependency: the chart is two polylines (truth and forecast over
the horizon) with a box, tick labels, and a legend. Values are drawn in
whatever units the dataset is in, which for harness output means
standardized units.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .data import WindowDataset
from .errors import ConfigError
from .models import Forecaster

__all__ = ["render_forecast_svg", "emit_forecast_plot"]

_W, _H = 800, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 60, 20, 40, 40


def _points(xs: np.ndarray, ys: np.ndarray, y_lo: float, y_hi: float, n: int) -> str:
    plot_w = _W - _MARGIN_L - _MARGIN_R
    plot_h = _H - _MARGIN_T - _MARGIN_B
    span = y_hi - y_lo
    out = []
    for x, y in zip(xs, ys):
        px = _MARGIN_L + plot_w * (x / max(n - 1, 1))
        py = _MARGIN_T + plot_h * (1.0 - (y - y_lo) / span)
        out.append(f"{px:.2f},{py:.2f}")
    return " ".join(out)


def render_forecast_svg(truth: np.ndarray, forecast: np.ndarray, title: str = "") -> str:
    """SVG with the true horizon and the forecast as two polylines."""
    truth = np.asarray(truth, dtype=np.float64).ravel()
    forecast = np.asarray(forecast, dtype=np.float64).ravel()
    if truth.shape != forecast.shape:
        raise ConfigError(f"truth has {truth.size} points, forecast {forecast.size}")
    if truth.size < 2:
        raise ConfigError("need at least 2 points to plot")
    n = truth.size
    lo = float(min(truth.min(), forecast.min()))
    hi = float(max(truth.max(), forecast.max()))
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    lo, hi = lo - pad, hi + pad
    xs = np.arange(n, dtype=np.float64)

    x0, y0 = _MARGIN_L, _MARGIN_T
    x1, y1 = _W - _MARGIN_R, _H - _MARGIN_B
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
        f'fill="none" stroke="#9ca3af"/>',
        f'<text x="{_W / 2:.0f}" y="24" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{x0}" y="{y1 + 16}" text-anchor="middle">0</text>',
        f'<text x="{x1}" y="{y1 + 16}" text-anchor="middle">{n - 1}</text>',
        f'<text x="{_W / 2:.0f}" y="{y1 + 32}" text-anchor="middle">steps ahead</text>',
        f'<text x="{x0 - 8}" y="{y1}" text-anchor="end">{lo:.2f}</text>',
        f'<text x="{x0 - 8}" y="{y0 + 10}" text-anchor="end">{hi:.2f}</text>',
        f'<text x="16" y="{_H / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_H / 2:.0f})">standardized value</text>',
        f'<polyline fill="none" stroke="#374151" stroke-width="1.5" '
        f'points="{_points(xs, truth, lo, hi, n)}"/>',
        f'<polyline fill="none" stroke="#d97706" stroke-width="1.5" '
        f'points="{_points(xs, forecast, lo, hi, n)}"/>',
        f'<line x1="{x1 - 150}" y1="{y0 + 14}" x2="{x1 - 120}" y2="{y0 + 14}" '
        f'stroke="#374151" stroke-width="1.5"/>',
        f'<text x="{x1 - 114}" y="{y0 + 18}">truth</text>',
        f'<line x1="{x1 - 150}" y1="{y0 + 32}" x2="{x1 - 120}" y2="{y0 + 32}" '
        f'stroke="#d97706" stroke-width="1.5"/>',
        f'<text x="{x1 - 114}" y="{y0 + 36}">forecast</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def emit_forecast_plot(
    model: Forecaster,
    test: WindowDataset,
    window_index: int,
    out_path,
    dataset_name: str = "",
    channel: int = 0,
) -> Path:
    """Forecast one test window with `model` and write the SVG to out_path."""
    if not 0 <= window_index < len(test):
        raise ConfigError(f"window_index {window_index} outside [0, {len(test)})")
    if not 0 <= channel < test.n_channels:
        raise ConfigError(f"channel {channel} outside [0, {test.n_channels})")
    xb, yb = test.gather(np.array([window_index]))
    pred = model(Tensor(xb)).data
    name = dataset_name or "series"
    title = (
        f"{name}: {model.config.variant} forecast, horizon {model.config.horizon}, "
        f"window {window_index}, channel {channel}"
    )
    svg = render_forecast_svg(yb[0, :, channel], pred[0, :, channel], title=title)
    p = Path(out_path)
    p.write_text(svg, encoding="utf-8")
    return p
