"""Regenerate the bundled synthetic ecosystem fixture.

200 APIs with raw category labels, 500 mashups over 2006-2010. Member
choice is preferential (popular APIs keep getting picked) and a share of
mashups reuse a pair from an earlier one, so co-occurrence weights spread
out. The category mix drifts over the years, giving the demand series a
trend to fit.

    python3 scripts/make_fixture.py [--out DIR] [--seed N]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from scenegen.config import bundled
from scenegen.ingest import ApiRecord, MashupRecord, write_dataset

RAW_LABELS = {
    "Infrastructure": ["Mapping", "Storage", "Cloud", "Search", "Telephony", "Messaging", "Security"],
    "Lifestyle Services": ["Travel", "Food", "Health", "Weather", "Shopping", "Events"],
    "Business Management": ["eCommerce", "Payments", "Enterprise", "Financial", "Marketing"],
    "Social Entertainment": ["Social", "Music", "Video", "Games", "Photos"],
}
YEARS = list(range(2006, 2011))
# category weights drift from infrastructure-heavy toward social
YEAR_MIX = {
    2006: [0.40, 0.20, 0.25, 0.15],
    2007: [0.36, 0.21, 0.24, 0.19],
    2008: [0.32, 0.22, 0.23, 0.23],
    2009: [0.29, 0.23, 0.21, 0.27],
    2010: [0.26, 0.24, 0.20, 0.30],
}
MASHUPS_PER_YEAR = [70, 85, 100, 115, 130]
REUSE = 0.5


def generate(n_apis: int = 200, seed: int = 2006) -> tuple[list[ApiRecord], list[MashupRecord]]:
    rng = np.random.default_rng(seed)
    cats = list(RAW_LABELS)
    apis, by_cat = [], {c: [] for c in cats}
    for i in range(n_apis):
        c = cats[i % len(cats)]
        label = RAW_LABELS[c][int(rng.integers(len(RAW_LABELS[c])))]
        start = int(rng.choice(YEARS[:3], p=[0.6, 0.25, 0.15]))
        api = ApiRecord(f"api{i:03d}", f"{label} API {i}", label, start, 2010)
        apis.append(api)
        by_cat[c].append(api)
    popularity = {a.api_id: float(rng.pareto(1.0) + 1.0) for a in apis}

    mashups = []
    for year, n in zip(YEARS, MASHUPS_PER_YEAR):
        for _ in range(n):
            size = int(rng.choice([2, 3, 4, 5], p=[0.45, 0.3, 0.15, 0.1]))
            members: set[str] = set()
            if mashups and rng.random() < REUSE:
                prev = sorted(mashups[int(rng.integers(len(mashups)))].member_apis)
                members.update(rng.choice(prev, size=2, replace=False).tolist())
            while len(members) < size:
                c = cats[int(rng.choice(len(cats), p=YEAR_MIX[year]))]
                pool = [a for a in by_cat[c] if a.year_active_from <= year]
                w = np.array([popularity[a.api_id] for a in pool])
                pick = pool[int(rng.choice(len(pool), p=w / w.sum()))].api_id
                members.add(pick)
            for m in members:
                popularity[m] += 0.5
            mashups.append(MashupRecord(f"m{len(mashups):04d}", year, frozenset(members)))
    return apis, mashups


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=bundled("fixture"))
    ap.add_argument("--seed", type=int, default=2006)
    args = ap.parse_args()
    apis, mashups = generate(seed=args.seed)
    write_dataset(Path(args.out), apis, mashups)
    print(f"wrote {len(apis)} APIs and {len(mashups)} mashups to {args.out}")


if __name__ == "__main__":
    main()
