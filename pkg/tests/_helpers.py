"""Shared builders for the test suite: records, tables, random CNFs."""
from __future__ import annotations

import random
from datetime import datetime, timezone

from censorloc.ingest import PrefixTable, parse_pfx2as
from censorloc.model import (
    AnomalyType,
    BackboneStatus,
    Hop,
    MeasurementRecord,
    Traceroute,
)

Assignment = dict[int, bool]


def ts(raw: str) -> datetime:
    return datetime.strptime(raw, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


def make_traceroute(*addrs: str, completed: bool = True) -> Traceroute:
    """Hop addresses in TTL order; "*" marks a non-responsive hop."""
    return Traceroute(
        hops=tuple(
            Hop(addr=None if a == "*" else a, ttl_index=i)
            for i, a in enumerate(addrs, start=1)
        ),
        completed=completed,
    )


def make_record(
    *,
    record_id: str = "r1",
    vantage_asn: int = 100,
    url: str = "http://example.com/",
    dst_ip: str = "9.9.0.1",
    anomaly: AnomalyType = AnomalyType.DNS,
    detected: bool = False,
    timestamp: str = "2016-05-02T12:00:00Z",
    traceroutes: tuple[Traceroute, ...] | None = None,
) -> MeasurementRecord:
    if traceroutes is None:
        tr = make_traceroute("9.9.0.1")
        traceroutes = (tr, tr, tr)
    return MeasurementRecord(
        record_id=record_id,
        vantage_asn=vantage_asn,
        url=url,
        dst_ip=dst_ip,
        anomaly=anomaly,
        detected=detected,
        timestamp=ts(timestamp),
        traceroutes=traceroutes,
    )


def make_table(spec: dict[str, int | tuple[int, ...]]) -> PrefixTable:
    """Prefix table from {"prefix/len": origin or (origins...)} via the real parser."""
    lines = []
    for prefix, origin in spec.items():
        addr, length = prefix.split("/")
        if isinstance(origin, tuple):
            origin_field = "_".join(str(o) for o in origin)
        else:
            origin_field = str(origin)
        lines.append(f"{addr}\t{length}\t{origin_field}")
    table, _ = parse_pfx2as("\n".join(lines) + "\n")
    return table


# ---------------------------------------------------------------------------
# CNF generation and the model-set oracle


def random_pipeline_cnf(
    rng: random.Random, max_vars: int = 15
) -> tuple[list[int], list[tuple[int, ...]]]:
    """A CNF in the bucket shape: all-positive clauses plus negative units."""
    n = rng.randint(1, max_vars)
    variables = sorted(rng.sample(range(1, 100000), n))
    clauses: list[tuple[int, ...]] = []
    for _ in range(rng.randint(0, 5)):
        k = rng.randint(1, min(n, 6))
        clauses.append(tuple(rng.sample(variables, k)))
    for v in rng.sample(variables, rng.randint(0, n)):
        clauses.append((-v,))
    rng.shuffle(clauses)
    return variables, clauses


def random_general_cnf(
    rng: random.Random, max_vars: int = 8
) -> tuple[list[int], list[tuple[int, ...]]]:
    """A CNF with arbitrary literal signs (exercises the DPLL path)."""
    n = rng.randint(1, max_vars)
    variables = list(range(1, n + 1))
    clauses: list[tuple[int, ...]] = []
    for _ in range(rng.randint(0, 8)):
        k = rng.randint(1, min(n, 4))
        chosen = rng.sample(variables, k)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in chosen))
    return variables, clauses


def satisfies(assignment: Assignment, clauses) -> bool:
    return all(
        any(assignment[abs(lit)] == (lit > 0) for lit in clause) for clause in clauses
    )


def backbone_from_models(variables, models: list[Assignment]) -> dict[int, BackboneStatus]:
    """Backbone derived from an exhaustive model list (no solver logic)."""
    if not models:
        return {}
    out: dict[int, BackboneStatus] = {}
    for v in variables:
        values = {m[v] for m in models}
        if values == {True}:
            out[v] = BackboneStatus.FORCED_TRUE
        elif values == {False}:
            out[v] = BackboneStatus.FORCED_FALSE
        else:
            out[v] = BackboneStatus.FREE
    return out
