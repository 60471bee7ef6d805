"""Wall-clock efficiency of whole method runs and the per-method summary table."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

log = logging.getLogger(__name__)

EFFICIENCY_COLUMNS = ("Sum", "Mean", "Peak", "/1kn", "/1ke")


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class TimingRecord:
    method: str
    run: int
    seconds: float
    nodes: int
    edges: int
    ok: bool = True
    error: str | None = None

    def __post_init__(self):
        if self.seconds < 0 or self.nodes < 0 or self.edges < 0:
            raise BenchError(f"negative field in {self}")


def time_run(thunk: Callable[[], object], method: str, nodes: int = 0, edges: int = 0,
             run: int = 0) -> TimingRecord:
    """Time one call on the monotonic clock; an exception yields a flagged record."""
    t0 = time.perf_counter()
    try:
        thunk()
    except Exception as exc:  # noqa: BLE001 - failures are recorded, not raised
        log.warning("%s run %d failed: %s", method, run, exc)
        return TimingRecord(method, run, time.perf_counter() - t0, nodes, edges, False,
                            f"{type(exc).__name__}: {exc}")
    return TimingRecord(method, run, time.perf_counter() - t0, nodes, edges)


@dataclass(frozen=True)
class EfficiencyRow:
    method: str
    sum: float
    mean: float
    peak: float
    per_1k_nodes: float
    per_1k_edges: float
    runs: int
    failed: int

    def values(self, scale: float = 1.0) -> tuple[float, ...]:
        return (self.sum * scale, self.mean * scale, self.peak * scale,
                self.per_1k_nodes * scale, self.per_1k_edges * scale)


def summarize(records: Iterable[TimingRecord], methods: Sequence[str] | None = None) -> list[EfficiencyRow]:
    """Per-method Sum/Mean/Peak and time per thousand nodes and edges, over successful runs."""
    records = list(records)
    order = list(methods) if methods is not None else list(dict.fromkeys(r.method for r in records))
    rows = []
    for m in order:
        mine = [r for r in records if r.method == m]
        good = [r for r in mine if r.ok]
        if not good:
            raise BenchError(f"no successful runs for method {m!r}")
        secs = [r.seconds for r in good]
        total = sum(secs)
        n = sum(r.nodes for r in good)
        e = sum(r.edges for r in good)
        rows.append(EfficiencyRow(
            m, total, total / len(good), max(secs),
            total / (n / 1000) if n else float("nan"),
            total / (e / 1000) if e else float("nan"),
            len(good), len(mine) - len(good),
        ))
    return rows


def run_bench(thunks: dict[str, tuple[Callable[[], object], int, int]], runs: int) -> list[TimingRecord]:
    """``thunks`` maps method -> (thunk, nodes, edges); methods run one after another."""
    out = []
    for m, (thunk, nodes, edges) in thunks.items():
        for k in range(runs):
            out.append(time_run(thunk, m, nodes, edges, k))
    return out


def write_records(path: str | Path, records: Sequence[TimingRecord]) -> None:
    Path(path).write_text(json.dumps([asdict(r) for r in records], indent=1) + "\n", encoding="utf-8")


def read_records(path: str | Path) -> list[TimingRecord]:
    return [TimingRecord(**r) for r in json.loads(Path(path).read_text(encoding="utf-8"))]


def write_report(stem: str | Path, rows: Sequence[EfficiencyRow], kiloseconds: bool = False) -> None:
    """``stem``.csv and ``stem``.json in seconds, or ks with ``kiloseconds``."""
    scale = 1e-3 if kiloseconds else 1.0
    unit = "ks" if kiloseconds else "s"
    stem = Path(stem)
    with stem.with_suffix(".csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Method", *EFFICIENCY_COLUMNS])
        for r in rows:
            w.writerow([r.method, *(f"{v:.6g}" for v in r.values(scale))])
    obj = {"unit": unit, "columns": list(EFFICIENCY_COLUMNS),
           "rows": {r.method: dict(zip(EFFICIENCY_COLUMNS, r.values(scale))) | {"runs": r.runs, "failed": r.failed}
                    for r in rows}}
    stem.with_suffix(".json").write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")
