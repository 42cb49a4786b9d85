"""Optional SVG line plots of emitted series.

Renders are byte-deterministic (fixed hash salt, no embedded date) so
plot files participate in the double-run output comparison. Plots are a
view of the written CSVs, never the source of truth.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

from .io import atomic_write_bytes  # noqa: E402


def line_plot(path, named_series: dict, title: str, ylabel: str = "") -> None:
    """Write one SVG with a line (or band) per named series.

    Values of ``named_series`` are (dates, values) pairs; a name ending in
    "band" may map to (dates, lower, upper) and renders as a shaded area.
    """
    plt.rcParams["svg.hashsalt"] = "episearch"
    fig, ax = plt.subplots(figsize=(9, 4))
    for name in sorted(named_series):
        payload = named_series[name]
        if len(payload) == 3:
            dates, lower, upper = payload
            ax.fill_between(dates, lower, upper, alpha=0.25, label=name)
        else:
            dates, values = payload
            ax.plot(dates, values, label=name, linewidth=1.2)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.legend(loc="upper left", fontsize=8)
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y-%m-%d"))
    fig.autofmt_xdate()
    import io as _io

    buffer = _io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write_bytes(path, buffer.getvalue())
