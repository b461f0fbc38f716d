"""Compile (AS path, verdict) observations into per-bucket CNF instances.

The boolean model: one variable per AS, true meaning "this AS censors the
bucket's (anomaly, URL) in this window". A path that observed the anomaly
says at least one AS on it is responsible (one all-positive disjunction); a
clean path says no AS on it is (one negative unit clause per AS). Every CNF
clause this module emits is therefore either all-positive or a negative unit.
"""
from __future__ import annotations

import hashlib
from typing import Iterable, Sequence

from .ingest import window_id
from .model import (
    AsPath,
    BucketKey,
    Clause,
    CnfInstance,
    MeasurementRecord,
    TimeGranularity,
)

MERGED_URL = "*"
"""Bucket-key url value when URL splitting is disabled."""

# (path, detected, record_id) as flowing out of bucketing into CNF building
Entry = tuple[AsPath, bool, str]


def build_clause(path: AsPath, detected: bool) -> Clause:
    """One observation on one path becomes one clause over the path's ASes."""
    return Clause(literal_asns=frozenset(path.asns), truth=detected)


def bucket(
    pairs: Iterable[tuple[MeasurementRecord, AsPath]],
    granularity: TimeGranularity,
    url_split: bool = True,
) -> dict[BucketKey, list[Entry]]:
    """Group inferred paths by (anomaly, url, window); entries stay in
    timestamp order within each bucket (ties keep input order)."""
    grouped: dict[BucketKey, list[tuple]] = {}
    for seq, (record, path) in enumerate(pairs):
        key = BucketKey(
            anomaly=record.anomaly,
            url=record.url if url_split else MERGED_URL,
            granularity=granularity,
            window_id=window_id(record.timestamp, granularity),
        )
        grouped.setdefault(key, []).append(
            (record.timestamp, seq, path, record.detected, record.record_id)
        )
    out: dict[BucketKey, list[Entry]] = {}
    for key, rows in grouped.items():
        rows.sort(key=lambda r: (r[0], r[1]))
        out[key] = [(path, detected, record_id) for _, _, path, detected, record_id in rows]
    return out


def build_cnf(key: BucketKey, entries: Sequence[Entry]) -> CnfInstance:
    """Build one bucket's CNF instance.

    Clauses are deduplicated per (literal set, truth); contradictory pairs
    (same set, both truths) are retained and left for the solver to expose as
    unsatisfiable. source_paths keeps every entry verbatim.
    """
    if not entries:
        raise ValueError("a bucket cannot be empty")
    seen: set[Clause] = set()
    for path, detected, _ in entries:
        seen.add(build_clause(path, detected))
    clauses = tuple(sorted(seen, key=lambda c: c.canonical_key()))
    variables: set[int] = set()
    for clause in clauses:
        variables |= clause.literal_asns
    return CnfInstance(
        key=key,
        variables=tuple(sorted(variables)),
        clauses=clauses,
        source_paths=tuple(entries),
    )


def build_instances(
    pairs: Sequence[tuple[MeasurementRecord, AsPath]],
    granularities: Sequence[TimeGranularity],
    url_split: bool = True,
) -> list[CnfInstance]:
    """All CNF instances for a run, sorted by bucket key."""
    instances: list[CnfInstance] = []
    for granularity in granularities:
        for key, entries in bucket(pairs, granularity, url_split).items():
            instances.append(build_cnf(key, entries))
    instances.sort(key=lambda inst: inst.key.sort_key())
    return instances


def to_cnf_clauses(instance: CnfInstance) -> list[tuple[int, ...]]:
    """Expand to solver clauses over signed ASNs.

    truth=True  -> one all-positive disjunction (x1 v ... v xk)
    truth=False -> k negative unit clauses (De Morgan on NOT(x1 v ... v xk))
    Unit clauses are deduplicated; positive disjunctions are already distinct.
    """
    positives: list[tuple[int, ...]] = []
    negative_units: set[int] = set()
    for clause in instance.clauses:
        if clause.truth:
            positives.append(tuple(sorted(clause.literal_asns)))
        else:
            negative_units.update(clause.literal_asns)
    return positives + [(-asn,) for asn in sorted(negative_units)]


def _variable_numbering(instance: CnfInstance) -> dict[int, int]:
    # DIMACS variables 1..n in ascending ASN order
    return {asn: i for i, asn in enumerate(instance.variables, start=1)}


def to_dimacs(instance: CnfInstance) -> str:
    """Render one instance in DIMACS CNF, with the AS map in comments."""
    numbering = _variable_numbering(instance)
    clauses = to_cnf_clauses(instance)
    lines = [f"p cnf {len(instance.variables)} {len(clauses)}"]
    for asn, i in numbering.items():
        lines.append(f"c var {i} = AS{asn} {instance.key.anomaly.value}")
    for clause in clauses:
        signed = " ".join(
            str(numbering[lit] if lit > 0 else -numbering[-lit]) for lit in clause
        )
        lines.append(f"{signed} 0")
    return "\n".join(lines) + "\n"


def url_hash(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()[:12]


def dimacs_filename(key: BucketKey) -> str:
    return (
        f"{key.anomaly.value}_{url_hash(key.url)}_"
        f"{key.granularity.value}_{key.window_id}.cnf"
    )
