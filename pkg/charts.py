"""
Figure Artifacts
CSV tables and SVG line charts for the reproduced figures
"""

from typing import Dict, List, Tuple
from pathlib import Path
import csv
import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from models import FigureId

logger = logging.getLogger(__name__)

# Column names per figure, in file order. fig3 tables end each h block with a
# tail row at M = max_count + 1 holding the mass of all counts above max_count.
CSV_COLUMNS = {
    FigureId.FIG1: ["k", "K", "empirical", "analytic", "se"],
    FigureId.FIG2: ["k", "K", "empirical", "analytic", "se"],
    FigureId.FIG3: ["h", "M", "empirical", "poisson"],
}

# (series column, x column, empirical column, analytic column, axis labels)
CHART_LAYOUT = {
    FigureId.FIG1: ("k", "K", "empirical", "analytic", ("K", "P[min degree >= k]")),
    FigureId.FIG2: ("k", "K", "empirical", "analytic", ("K", "P[min degree = k]")),
    FigureId.FIG3: ("h", "M", "empirical", "poisson", ("M", "P[number of degree-h nodes = M]")),
}

INTEGER_COLUMNS = {"k", "K", "h", "M"}

# Fixed salt and no timestamp keep SVG output byte-identical between runs
SVG_RC = {"svg.hashsalt": "keygraph", "svg.fonttype": "path"}


class CsvFormatError(ValueError):
    """Raised when a CSV does not carry the columns of the requested figure"""
    pass


def format_value(value: float) -> str:
    """Six significant digits"""
    return f"{value:.6g}"


# ============================================================================
# CSV
# ============================================================================

def write_csv(figure: FigureId, rows: List[Dict], path: Path) -> Path:
    """Write figure rows; float columns are rounded to six significant digits"""
    columns = CSV_COLUMNS[figure]
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                str(int(row[name])) if name in INTEGER_COLUMNS else format_value(row[name])
                for name in columns
            ])
    logger.info("Wrote %d rows to %s", len(rows), path)
    return path


def read_csv(figure: FigureId, path: Path) -> List[Dict]:
    columns = CSV_COLUMNS[figure]
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != columns:
            raise CsvFormatError(f"{path} does not have the {figure.value} columns {columns}")
        return [
            {name: int(row[name]) if name in INTEGER_COLUMNS else float(row[name]) for name in columns}
            for row in reader
        ]


# ============================================================================
# CHARTS
# ============================================================================

def _series(figure: FigureId, rows: List[Dict]) -> Dict[int, List[Tuple[int, float, float]]]:
    series_col, x_col, emp_col, ana_col, _ = CHART_LAYOUT[figure]
    grouped: Dict[int, List[Tuple[int, float, float]]] = {}
    for row in rows:
        grouped.setdefault(row[series_col], []).append((row[x_col], row[emp_col], row[ana_col]))
    for points in grouped.values():
        points.sort()
    return dict(sorted(grouped.items()))


def render_chart(figure: FigureId, rows: List[Dict], path: Path) -> Path:
    """Multi-series line chart, empirical (E) dashed with markers, analytic (A) solid"""
    series_col, _, _, _, (x_label, y_label) = CHART_LAYOUT[figure]
    path = Path(path)
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for index, (key, points) in enumerate(_series(figure, rows).items()):
            color = f"C{index % 10}"
            xs = [x for x, _, _ in points]
            ax.plot(xs, [e for _, e, _ in points], linestyle="--", marker="o",
                    color=color, label=f"{series_col}={key} (E)")
            ax.plot(xs, [a for _, _, a in points], linestyle="-",
                    color=color, label=f"{series_col}={key} (A)")
        ax.set_xlabel(x_label)
        ax.set_ylabel(y_label)
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7, ncol=2)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info("Rendered %s", path)
    return path


def render_from_csv(figure: FigureId, csv_path: Path, svg_path: Path) -> Path:
    """Re-render the chart of `figure` from an emitted CSV"""
    return render_chart(figure, read_csv(figure, csv_path), svg_path)
