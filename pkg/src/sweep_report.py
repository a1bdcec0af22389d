#!/usr/bin/env python3
"""
Tables and charts for sweep results.

CSV output has the fixed header
``axis,value,scheme,mean_ee_bit_per_joule,mean_rate_bps,mean_users,trials``
and is byte-identical for identical rows. Charts are written as SVG with one
line per scheme; a text chart is printed when matplotlib is unavailable.
"""
import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd

from sweep_runner import AXIS_PMAX, SweepRow

log = logging.getLogger(__name__)

CSV_COLUMNS = ['axis', 'value', 'scheme', 'mean_ee_bit_per_joule', 'mean_rate_bps', 'mean_users', 'trials']

METRICS = {
    'ee': ('mean_ee_bit_per_joule', 'Energy efficiency (bit/J)'),
    'rate': ('mean_rate_bps', 'System throughput (bit/s)'),
    'users': ('mean_users', 'Scheduled users'),
}
AXIS_LABELS = {AXIS_PMAX: 'Maximum transmit power per link (dBm)', 'p_sta_0_mw': 'AP static power (mW)'}


class SweepReportError(OSError):
    """A report file could not be written."""


def rows_to_frame(rows: List[SweepRow]) -> pd.DataFrame:
    if not rows:
        raise ValueError("no sweep rows to report")
    return pd.DataFrame(
        [[r.axis, r.axis_value, r.scheme, r.mean_ee, r.mean_rate, r.mean_scheduled_users, r.trials]
         for r in rows],
        columns=CSV_COLUMNS,
    )


def default_metric(rows: List[SweepRow]) -> str:
    return 'ee' if rows and rows[0].axis == AXIS_PMAX else 'users'


def write_csv(rows: List[SweepRow], output_file: str) -> Path:
    frame = rows_to_frame(rows)
    output_path = Path(output_file)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(output_path, index=False, float_format='%.12g', lineterminator='\n')
    except OSError as e:
        raise SweepReportError(f"could not write sweep CSV to {output_path}: {e}") from e
    log.info("wrote %d rows to %s", len(frame), output_path)
    return output_path


def write_chart(rows: List[SweepRow], output_file: str, metric: Optional[str] = None) -> Path:
    """Render ``metric`` against the sweep axis, one line per scheme, as SVG."""
    frame = rows_to_frame(rows)
    metric = metric or default_metric(rows)
    if metric not in METRICS:
        raise ValueError(f"unknown chart metric {metric!r}, expected one of {sorted(METRICS)}")
    column, label = METRICS[metric]
    axis = rows[0].axis
    output_path = Path(output_file)

    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    import seaborn as sns

    plt.rcParams['svg.hashsalt'] = 'sweep-report'
    sns.set_palette("husl")
    fig, ax = plt.subplots(figsize=(8, 5))
    try:
        sns.lineplot(data=frame, x='value', y=column, hue='scheme', style='scheme', markers=True,
                     dashes=False, ax=ax)
        if axis != AXIS_PMAX:
            ax.set_xscale('symlog', linthresh=10.0)
        ax.set_xlabel(AXIS_LABELS.get(axis, axis))
        ax.set_ylabel(label)
        ax.set_title(f"{label} vs. {AXIS_LABELS.get(axis, axis)}", fontweight='bold')
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        output_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(output_path, format='svg', metadata={'Date': None})
    except OSError as e:
        raise SweepReportError(f"could not write chart to {output_path}: {e}") from e
    finally:
        plt.close(fig)
    log.info("wrote %s chart to %s", metric, output_path)
    return output_path


def text_chart(rows: List[SweepRow], metric: Optional[str] = None) -> str:
    """Bar chart of ``metric`` per scheme and axis value, scaled to the column maximum."""
    frame = rows_to_frame(rows)
    column, label = METRICS[metric or default_metric(rows)]
    peak = frame[column].max()
    lines = [f"\n{'='*80}", f"📊 {label.upper()}", f"{'='*80}"]
    for scheme, group in frame.groupby('scheme', sort=False):
        lines.append(f"\n{scheme}:")
        for _, row in group.iterrows():
            bar = "█" * int(40 * row[column] / peak) if peak > 0 else ""
            lines.append(f"  {row['value']:>10g}: {row[column]:>14.6g} {bar}")
    return "\n".join(lines)


def summary_table(rows: List[SweepRow]) -> str:
    frame = rows_to_frame(rows)
    frame['surrogate'] = [row.surrogate for row in rows]
    return frame.drop(columns=['axis']).to_string(index=False, float_format=lambda v: f"{v:.6g}")


def emit(rows: List[SweepRow], fmt: str, out_dir: str, metric: Optional[str] = None,
         stem: Optional[str] = None) -> List[Path]:
    """
    Write sweep rows as ``csv`` or ``chart`` into ``out_dir``.

    Returns:
        Paths of the files written.
    """
    if not rows:
        raise ValueError("no sweep rows to emit")
    stem = stem or f"sweep_{rows[0].axis}"
    if fmt == 'csv':
        return [write_csv(rows, str(Path(out_dir) / f"{stem}.csv"))]
    if fmt == 'chart':
        metric = metric or default_metric(rows)
        try:
            return [write_chart(rows, str(Path(out_dir) / f"{stem}_{metric}.svg"), metric)]
        except ImportError:
            print("⚠️  Chart output requires matplotlib and seaborn. Install with: pip install matplotlib seaborn")
            print(text_chart(rows, metric))
            return []
    raise ValueError(f"unknown output format {fmt!r}, expected 'csv' or 'chart'")
