"""Writers for JSON reports and the CSV/SVG report bundle."""

import csv
import json
from pathlib import Path

from .evaluate import TABLE_ORDER
from .plots import line_plot


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_bundle(report: dict, out_dir) -> list[Path]:
    """Write ``report.json`` plus per-figure CSV/SVG files; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "report.json"
    dump_json(report, path)
    written.append(path)

    path = out / "context_table.txt"
    path.write_text(report["context_table"])
    written.append(path)
    rows = []
    for fold, entry in report["folds"].items():
        dist = entry.get("context_distribution")
        if not dist:
            continue
        for ctx in TABLE_ORDER:
            rows.append([fold, ctx, dist["counts"][ctx], dist["percentages"][ctx], "yes" if ctx in dist["absent"] else "no"])
    path = out / "context_table.csv"
    _write_rows(path, ["fold", "context", "frost_tiles", "percent", "absent"], rows)
    written.append(path)

    for fold, entry in report["folds"].items():
        curves = entry.get("recall_curves") or []
        if not curves:
            continue
        present = [c for c in curves if c["represented"]]
        grid = present[0]["thresholds"]
        header = ["threshold"] + [c["context"] for c in curves]
        rows = []
        for i, t in enumerate(grid):
            rows.append([repr(t)] + [repr(c["recall"][i]) if c["represented"] else "" for c in curves])
        path = out / f"recall_{fold}.csv"
        _write_rows(path, header, rows)
        written.append(path)
        series = [(f"{c['context']} (n={c['support']})", grid, c["recall"]) for c in present]
        path = out / f"recall_{fold}.svg"
        path.write_text(
            line_plot(series, f"Frost recall vs threshold ({fold})", "threshold", "recall", y_range=(0.0, 1.0), step=True)
        )
        written.append(path)

    shift = report.get("intensity_shift") or {}
    metric_rows = []
    for name, entry in shift.items():
        if "skipped" in entry:
            metric_rows.append([name, "", "", "", "", entry["skipped"]])
            continue
        fa, fb = entry["a"]["frequencies"], entry["b"]["frequencies"]
        la, lb = entry["a"]["scope"]["fold"], entry["b"]["scope"]["fold"]
        path = out / f"histogram_{name}.csv"
        _write_rows(path, ["intensity", la, lb], [[i, repr(a), repr(b)] for i, (a, b) in enumerate(zip(fa, fb))])
        written.append(path)
        xs = list(range(len(fa)))
        path = out / f"histogram_{name}.svg"
        path.write_text(
            line_plot([(la, xs, fa), (lb, xs, fb)], f"Pixel intensity ({name})", "intensity", "frequency", x_range=(0, 255))
        )
        written.append(path)
        metric_rows.append(
            [name, repr(entry["histogram_intersection"]), repr(entry["wasserstein_1"]), entry["modes_a"], entry["modes_b"], ""]
        )
    if metric_rows:
        path = out / "shift_metrics.csv"
        _write_rows(path, ["scope", "histogram_intersection", "wasserstein_1", "modes_train", "modes_test", "note"], metric_rows)
        written.append(path)
    return written
