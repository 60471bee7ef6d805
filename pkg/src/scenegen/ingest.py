"""Dataset loading, category classification and per-year demand/network builds.

A dataset is a directory holding two tables, ``apis`` and ``mashups``, either
as CSV (``apis.csv``/``mashups.csv``) or JSON lines (``apis.jsonl``/
``mashups.jsonl``).

CSV columns::

    apis.csv     api_id,name,category_raw,from,to
    mashups.csv  mashup_id,year,member_apis        (members ';'-separated)

JSON-lines records carry the same keys, with ``member_apis`` as a list.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .graph import Network

log = logging.getLogger(__name__)

INFRASTRUCTURE = "Infrastructure"
LIFESTYLE = "Lifestyle Services"
BUSINESS = "Business Management"
SOCIAL = "Social Entertainment"
CATEGORIES: tuple[str, ...] = (INFRASTRUCTURE, LIFESTYLE, BUSINESS, SOCIAL)

FORMATS = ("csv", "jsonl")


class DatasetError(ValueError):
    """Malformed dataset file or broken referential integrity."""


class ClassifierUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class ApiRecord:
    api_id: str
    name: str
    category_raw: str
    year_active_from: int
    year_active_to: int

    def __post_init__(self):
        if self.year_active_from > self.year_active_to:
            raise DatasetError(
                f"api {self.api_id!r}: active range {self.year_active_from}>{self.year_active_to}"
            )


@dataclass(frozen=True)
class MashupRecord:
    mashup_id: str
    year: int
    member_apis: frozenset[str]

    def __post_init__(self):
        if not self.member_apis:
            raise DatasetError(f"mashup {self.mashup_id!r} has no member APIs")


@dataclass
class DemandSeries:
    """Per-category invocation counts by year.

    ``api_calls[year][api_id]`` keeps the per-API breakdown the category
    totals were summed from; effectiveness scoring needs it.
    """

    years: list[int]
    calls: dict[str, dict[int, float]]
    api_calls: dict[int, dict[str, float]] = field(default_factory=dict)
    categories: tuple[str, ...] = CATEGORIES

    def __post_init__(self):
        if tuple(self.categories) != CATEGORIES:
            raise ValueError(f"categories must be exactly {CATEGORIES}")
        for c in CATEGORIES:
            row = self.calls.setdefault(c, {})
            for y in self.years:
                row.setdefault(y, 0.0)
                if row[y] < 0:
                    raise ValueError(f"negative demand {c}/{y}")

    def vector(self, year: int) -> list[float]:
        if year not in self.years:
            raise KeyError(f"year {year} not in demand series")
        return [float(self.calls[c][year]) for c in CATEGORIES]

    def total(self, year: int) -> float:
        return sum(self.vector(year))

    def restricted(self, api_ids: Iterable[str], category_map: dict[str, str], year: int) -> "DemandSeries":
        """Demand for ``year`` counting only the given APIs."""
        keep = set(api_ids)
        per_api = {a: n for a, n in self.api_calls.get(year, {}).items() if a in keep}
        calls = {c: {year: 0.0} for c in CATEGORIES}
        for a, n in per_api.items():
            calls[category_map[a]][year] += n
        return DemandSeries([year], calls, {year: per_api})


# -- loading -------------------------------------------------------------


def _int(value, where: str) -> int:
    try:
        return int(str(value).strip())
    except (TypeError, ValueError):
        raise DatasetError(f"{where}: expected integer, got {value!r}") from None


def _read_csv(path: Path, required: Sequence[str]) -> list[tuple[int, dict]]:
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return []
    reader = csv.DictReader(text.splitlines())
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        raise DatasetError(f"{path}:1: missing columns {missing}")
    rows = []
    for row in reader:
        if None in row or any(row.get(c) is None for c in required):
            raise DatasetError(f"{path}:{reader.line_num}: wrong number of fields")
        rows.append((reader.line_num, row))
    return rows


def _read_jsonl(path: Path, required: Sequence[str]) -> list[tuple[int, dict]]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise DatasetError(f"{path}:{lineno}: expected an object")
            missing = [c for c in required if c not in obj]
            if missing:
                raise DatasetError(f"{path}:{lineno}: missing keys {missing}")
            rows.append((lineno, obj))
    return rows


def load_dataset(path: str | Path, format: str = "csv") -> tuple[list[ApiRecord], list[MashupRecord]]:
    """Parse a dataset directory and validate mashup -> API references."""
    if format not in FORMATS:
        raise DatasetError(f"unknown format {format!r}; expected one of {FORMATS}")
    root = Path(path)
    ext = "csv" if format == "csv" else "jsonl"
    api_path, mashup_path = root / f"apis.{ext}", root / f"mashups.{ext}"
    for p in (api_path, mashup_path):
        if not p.is_file():
            raise DatasetError(f"missing dataset file {p}")
    read = _read_csv if format == "csv" else _read_jsonl

    apis: list[ApiRecord] = []
    seen: set[str] = set()
    for lineno, row in read(api_path, ("api_id", "name", "category_raw", "from", "to")):
        where = f"{api_path}:{lineno}"
        api_id = str(row["api_id"]).strip()
        if not api_id:
            raise DatasetError(f"{where}: empty api_id")
        if api_id in seen:
            raise DatasetError(f"{where}: duplicate api_id {api_id!r}")
        seen.add(api_id)
        try:
            apis.append(ApiRecord(api_id, str(row["name"]), str(row["category_raw"]),
                                  _int(row["from"], where), _int(row["to"], where)))
        except DatasetError as exc:
            raise DatasetError(f"{where}: {exc}") from None

    mashups: list[MashupRecord] = []
    for lineno, row in read(mashup_path, ("mashup_id", "year", "member_apis")):
        where = f"{mashup_path}:{lineno}"
        members = row["member_apis"]
        if isinstance(members, str):
            members = [m.strip() for m in members.split(";") if m.strip()]
        members = frozenset(str(m) for m in members)
        dangling = sorted(members - seen)
        if dangling:
            raise DatasetError(f"{where}: dangling api_id reference(s) {dangling}")
        try:
            mashups.append(MashupRecord(str(row["mashup_id"]), _int(row["year"], where), members))
        except DatasetError as exc:
            raise DatasetError(f"{where}: {exc}") from None
    return apis, mashups


def write_dataset(path: str | Path, apis: Sequence[ApiRecord], mashups: Sequence[MashupRecord],
                  format: str = "csv") -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        with (root / "apis.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["api_id", "name", "category_raw", "from", "to"])
            for a in apis:
                w.writerow([a.api_id, a.name, a.category_raw, a.year_active_from, a.year_active_to])
        with (root / "mashups.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mashup_id", "year", "member_apis"])
            for m in mashups:
                w.writerow([m.mashup_id, m.year, ";".join(sorted(m.member_apis))])
    elif format == "jsonl":
        with (root / "apis.jsonl").open("w", encoding="utf-8") as fh:
            for a in apis:
                fh.write(json.dumps({"api_id": a.api_id, "name": a.name, "category_raw": a.category_raw,
                                     "from": a.year_active_from, "to": a.year_active_to}) + "\n")
        with (root / "mashups.jsonl").open("w", encoding="utf-8") as fh:
            for m in mashups:
                fh.write(json.dumps({"mashup_id": m.mashup_id, "year": m.year,
                                     "member_apis": sorted(m.member_apis)}) + "\n")
    else:
        raise DatasetError(f"unknown format {format!r}")


# -- classification ------------------------------------------------------


class EmbeddingClassifier(Protocol):
    def classify(self, api: ApiRecord) -> str: ...


# Substring keywords over the lowercased raw label, checked in order.
KEYWORD_TABLE: tuple[tuple[str, tuple[str, ...]], ...] = (
    (BUSINESS, ("commerce", "payment", "enterprise", "financ", "bank", "marketing",
                "advertis", "crm", "office", "project management", "accounting", "business")),
    (SOCIAL, ("social", "music", "video", "game", "entertainment", "photo", "media",
              "sport", "blog", "dating", "humor")),
    (LIFESTYLE, ("travel", "food", "health", "weather", "shopping", "event", "real estate",
                 "education", "recipe", "fitness", "medical", "lifestyle")),
    (INFRASTRUCTURE, ("mapping", "map", "storage", "cloud", "tool", "search", "telephony",
                      "messaging", "security", "reference", "internet", "database", "hosting",
                      "infrastructure")),
)


class KeywordClassifier:
    """Offline stand-in for the embedding classifier: keyword lookup on the raw label."""

    fallback = INFRASTRUCTURE

    def classify(self, api: ApiRecord) -> str:
        label = api.category_raw.lower()
        for category, words in KEYWORD_TABLE:
            if any(w in label for w in words):
                return category
        log.warning("api %s: unknown raw category %r, falling back to %s",
                    api.api_id, api.category_raw, self.fallback)
        return self.fallback


class AdapterClassifier:
    """Routes classification through a text model (``category-label`` schema)."""

    def __init__(self, adapter):
        self.adapter = adapter

    def classify(self, api: ApiRecord) -> str:
        from .llm import CompletionRequest, SchemaHint, LLMError

        if self.adapter is None:
            raise ClassifierUnavailable("no adapter configured for external classification")
        req = CompletionRequest(
            system_prompt="Assign the API to one of: " + ", ".join(CATEGORIES) + ". Reply with the label only.",
            user_prompt=f"API name: {api.name}\nRaw category: {api.category_raw}",
            schema_hint=SchemaHint("category-label"),
        )
        try:
            resp = self.adapter.complete(req)
        except LLMError as exc:
            raise ClassifierUnavailable(str(exc)) from exc
        if resp.parsed is None:
            log.warning("api %s: unparseable label %r, falling back", api.api_id, resp.text)
            return INFRASTRUCTURE
        return resp.parsed


def classify_categories(apis: Sequence[ApiRecord], classifier: EmbeddingClassifier | None = None) -> dict[str, str]:
    classifier = classifier or KeywordClassifier()
    out = {}
    for a in apis:
        c = classifier.classify(a)
        if c not in CATEGORIES:
            raise ValueError(f"classifier returned non-canonical category {c!r}")
        out[a.api_id] = c
    return out


# -- demand and networks -------------------------------------------------


def dataset_years(mashups: Iterable[MashupRecord]) -> list[int]:
    return sorted({m.year for m in mashups})


def build_demand_series(mashups: Iterable[MashupRecord], category_map: dict[str, str],
                        years: Sequence[int]) -> DemandSeries:
    years = sorted(years)
    wanted = set(years)
    calls = {c: {y: 0.0 for y in years} for c in CATEGORIES}
    api_calls: dict[int, dict[str, float]] = {y: defaultdict(float) for y in years}
    for m in mashups:
        if m.year not in wanted:
            continue
        for api in m.member_apis:
            calls[category_map[api]][m.year] += 1
            api_calls[m.year][api] += 1
    return DemandSeries(list(years), calls, {y: dict(sorted(d.items())) for y, d in api_calls.items()})


def build_network(mashups: Iterable[MashupRecord], year: int) -> Network:
    g = Network()
    for m in mashups:
        if m.year != year:
            continue
        members = sorted(m.member_apis)
        for a in members:
            g.add_node(a)
        for a, b in combinations(members, 2):
            g.add_edge(a, b, g.weight(a, b) + 1.0)
    return g
