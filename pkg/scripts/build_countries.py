"""Rebuild data/countries from the country records shipped in the countryinfo wheel.

Usage: python scripts/build_countries.py path/to/countryinfo-*.whl [--out data/countries] [--seed 0]

Records without an ISO alpha-3 code or a region are dropped; when several
records share a code the one with a region wins. Borders are symmetrised
and borders to dropped codes are discarded.
"""

import argparse
import json
import zipfile
from pathlib import Path

from lineare.countries import CountriesTable, build_tasks, write_table, write_tasks


def slug(name: str) -> str:
    return name.strip().lower().replace(" ", "_").replace("-", "_")


def read_records(wheel: Path) -> list[dict]:
    records = []
    with zipfile.ZipFile(wheel) as zf:
        for name in sorted(zf.namelist()):
            if name.startswith("countryinfo/data/") and name.endswith(".json"):
                records.append(json.loads(zf.read(name)))
    return records


def table_from_records(records: list[dict]) -> CountriesTable:
    located, raw_borders = {}, {}
    for rec in records:
        code = (rec.get("ISO") or {}).get("alpha3")
        region, sub = rec.get("region"), rec.get("subregion")
        if not code or not region or not sub:
            continue
        c = code.lower()
        located[c] = (slug(sub), slug(region))
        raw_borders[c] = [b.lower() for b in rec.get("borders") or []]
    borders = {frozenset((a, b)) for a, bs in raw_borders.items() for b in bs if b in located and b != a}
    return CountriesTable(located, borders)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wheel", type=Path)
    ap.add_argument("--out", type=Path, default=Path("data/countries"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--held-out", type=int, default=24)
    args = ap.parse_args()
    table = table_from_records(read_records(args.wheel))
    write_table(table, args.out / "base")
    tasks = build_tasks(table, args.held_out, args.seed)
    write_tasks(tasks, table.regions, args.out)
    print(f"{len(table.located)} countries, {len(table.subregions)} subregions, {len(table.regions)} regions, {len(table.borders)} borders")
    for task, kg in tasks.items():
        print(task, kg.num_entities, "entities", {s: len(kg.split(s)) for s in ("train", "valid", "test")})


if __name__ == "__main__":
    main()
