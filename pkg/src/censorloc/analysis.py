"""Downstream analyses over solved buckets.

Censor classification aggregates backbone roles across buckets per
(AS, anomaly); reduction stats quantify how much each ambiguous bucket still
narrowed the suspect set; leakage finds ASes upstream of a pinned censor that
provably do not censor yet had their traffic answered; churn quantifies
path instability and can be ablated away for comparison runs.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

from .ingest import AsRegistry, window_id
from .model import (
    AnomalyType,
    AsPath,
    BackboneStatus,
    BucketKey,
    CensorClass,
    CensorVerdict,
    CnfInstance,
    LeakageEdge,
    MeasurementRecord,
    SolutionStatus,
    SolutionSummary,
    TimeGranularity,
)


def identify_censors(summaries: Sequence[SolutionSummary]) -> list[CensorVerdict]:
    """Classify every observed (AS, anomaly) pair.

    Censor: forced true in at least one uniquely solvable bucket.
    PotentialCensor: otherwise, not forced false in some ambiguous bucket.
    NonCensor: forced false everywhere it appears.
    The verdict lists every contributing bucket key as witness.
    """
    censor_wit: dict[tuple[int, AnomalyType], list[BucketKey]] = {}
    potential_wit: dict[tuple[int, AnomalyType], list[BucketKey]] = {}
    seen: dict[tuple[int, AnomalyType], list[BucketKey]] = {}
    for summary in summaries:
        for asn, role in summary.backbone.items():
            pair = (asn, summary.key.anomaly)
            seen.setdefault(pair, []).append(summary.key)
            if summary.status is SolutionStatus.UNIQUE and role is BackboneStatus.FORCED_TRUE:
                censor_wit.setdefault(pair, []).append(summary.key)
            elif (
                summary.status is SolutionStatus.MULTIPLE
                and role is not BackboneStatus.FORCED_FALSE
            ):
                potential_wit.setdefault(pair, []).append(summary.key)

    def ordered(keys: list[BucketKey]) -> tuple[BucketKey, ...]:
        return tuple(sorted(set(keys), key=lambda k: k.sort_key()))

    verdicts: list[CensorVerdict] = []
    for pair in sorted(seen, key=lambda p: (p[1].value, p[0])):
        asn, anomaly = pair
        if pair in censor_wit:
            klass, witnesses = CensorClass.CENSOR, ordered(censor_wit[pair])
        elif pair in potential_wit:
            klass, witnesses = CensorClass.POTENTIAL_CENSOR, ordered(potential_wit[pair])
        else:
            klass, witnesses = CensorClass.NON_CENSOR, ordered(seen[pair])
        verdicts.append(
            CensorVerdict(asn=asn, censor_class=klass, anomaly=anomaly, witnesses=witnesses)
        )
    return verdicts


# ---------------------------------------------------------------------------
# reduction of the suspect set in ambiguous buckets


@dataclass(frozen=True)
class ReductionStat:
    """How far one ambiguous bucket narrowed its variables."""

    key: BucketKey
    n_vars: int
    n_forced_false: int

    @property
    def fraction_eliminated(self) -> float:
        return self.n_forced_false / self.n_vars


@dataclass(frozen=True)
class ReductionReport:
    stats: tuple[ReductionStat, ...]
    cdf: tuple[tuple[float, float], ...]
    """(fraction threshold, cumulative share of buckets) at 1% resolution."""
    mean_fraction: float | None
    """None (rendered "n/a") when there are no ambiguous buckets."""


def reduction_stats(summaries: Sequence[SolutionSummary]) -> ReductionReport:
    stats: list[ReductionStat] = []
    for summary in summaries:
        if summary.status is not SolutionStatus.MULTIPLE:
            continue
        n_vars = len(summary.backbone)
        n_ff = sum(
            1 for role in summary.backbone.values() if role is BackboneStatus.FORCED_FALSE
        )
        stats.append(ReductionStat(key=summary.key, n_vars=n_vars, n_forced_false=n_ff))
    stats.sort(key=lambda s: s.key.sort_key())
    cdf: list[tuple[float, float]] = []
    if stats:
        for i in range(101):
            # integer comparison keeps the threshold test exact
            below = sum(1 for s in stats if s.n_forced_false * 100 <= i * s.n_vars)
            cdf.append((i / 100, below / len(stats)))
        mean = sum(s.fraction_eliminated for s in stats) / len(stats)
    else:
        mean = None
    return ReductionReport(stats=tuple(stats), cdf=tuple(cdf), mean_fraction=mean)


# ---------------------------------------------------------------------------
# leakage


@dataclass(frozen=True)
class CensorLeakSummary:
    censor_asn: int
    censor_country: str
    leaks_as: int
    """Distinct victim ASNs upstream of this censor."""
    leaks_country: int
    """Distinct victim countries other than the censor's own."""


@dataclass(frozen=True)
class LeakageReport:
    edges: tuple[LeakageEdge, ...]
    per_censor: tuple[CensorLeakSummary, ...]
    skipped_missing_country: int


def detect_leakage(
    solved: Sequence[tuple[CnfInstance, SolutionSummary]],
    registry: AsRegistry,
) -> LeakageReport:
    """Find cross-AS (and cross-border) censorship spill-over.

    Only uniquely solvable buckets testify. On each source path that crossed
    a forced-true censor, every AS strictly closer to the vantage point that
    the solution forces false is a victim: its traffic was answered by a
    censor it provably does not operate. A victim in another country is
    additionally a country-level leak. ASes without a known country are
    skipped and tallied.
    """
    edges: dict[tuple[int, int, AnomalyType], LeakageEdge] = {}
    skipped = 0
    for instance, summary in sorted(solved, key=lambda t: t[0].key.sort_key()):
        if summary.status is not SolutionStatus.UNIQUE:
            continue
        backbone = summary.backbone
        forced_true = {
            asn for asn, role in backbone.items() if role is BackboneStatus.FORCED_TRUE
        }
        for path, truth, record_id in instance.source_paths:
            on_path = [asn for asn in path.asns if asn in forced_true]
            if not truth:
                # a pinned censor can never sit on a clean path
                assert not on_path, "forced-true variable on a truth-false source path"
                continue
            for censor in on_path:
                first_idx = path.asns.index(censor)
                censor_country = registry.country(censor)
                for victim in path.asns[:first_idx]:
                    if backbone.get(victim) is not BackboneStatus.FORCED_FALSE:
                        continue
                    victim_country = registry.country(victim)
                    if censor_country is None or victim_country is None:
                        skipped += 1
                        continue
                    dedup_key = (censor, victim, instance.key.anomaly)
                    if dedup_key in edges:
                        continue
                    edges[dedup_key] = LeakageEdge(
                        censor_asn=censor,
                        victim_asn=victim,
                        censor_country=censor_country,
                        victim_country=victim_country,
                        anomaly=instance.key.anomaly,
                        witness_key=instance.key,
                        witness_record_id=record_id,
                    )

    edge_list = sorted(
        edges.values(), key=lambda e: (e.censor_asn, e.victim_asn, e.anomaly.value)
    )
    per_censor: list[CensorLeakSummary] = []
    for censor in sorted({e.censor_asn for e in edge_list}):
        mine = [e for e in edge_list if e.censor_asn == censor]
        victims = {e.victim_asn for e in mine}
        foreign = {e.victim_country for e in mine if e.crosses_border}
        per_censor.append(
            CensorLeakSummary(
                censor_asn=censor,
                censor_country=mine[0].censor_country,
                leaks_as=len(victims),
                leaks_country=len(foreign),
            )
        )
    return LeakageReport(
        edges=tuple(edge_list),
        per_censor=tuple(per_censor),
        skipped_missing_country=skipped,
    )


# ---------------------------------------------------------------------------
# churn


@dataclass(frozen=True)
class ChurnCell:
    vantage_asn: int
    dst_asn: int
    window_id: str
    n_measurements: int
    distinct_paths: int


HISTOGRAM_BUCKETS = ("1", "2", "3", "4", "5+")


@dataclass(frozen=True)
class ChurnReport:
    granularity: TimeGranularity
    cells: tuple[ChurnCell, ...]
    fraction_churning: float | None
    """Share of multi-measurement cells that saw >= 2 distinct paths; None
    (rendered "n/a") when no cell had two measurements."""
    histogram: dict[str, int]
    multi_measurement_cells: int
    churning_cells: int


def churn_stats(
    observations: Sequence[tuple[int, int, datetime, AsPath]],
    granularity: TimeGranularity,
) -> ChurnReport:
    """Distinct-path counts per (vantage, destination, window).

    A pair churns in a window when it shows >= 2 distinct full path
    sequences; the churn fraction is taken over cells with >= 2 measurements
    so single-shot pairs cannot dilute it.
    """
    acc: dict[tuple[int, int, str], tuple[int, set[tuple[int, ...]]]] = {}
    for vantage, dst, ts, path in observations:
        cell_key = (vantage, dst, window_id(ts, granularity))
        count, paths = acc.setdefault(cell_key, (0, set()))
        paths.add(path.asns)
        acc[cell_key] = (count + 1, paths)
    cells = tuple(
        ChurnCell(
            vantage_asn=v,
            dst_asn=d,
            window_id=w,
            n_measurements=count,
            distinct_paths=len(paths),
        )
        for (v, d, w), (count, paths) in sorted(acc.items())
    )
    histogram = {b: 0 for b in HISTOGRAM_BUCKETS}
    for cell in cells:
        bucket = str(cell.distinct_paths) if cell.distinct_paths < 5 else "5+"
        histogram[bucket] += 1
    multi = sum(1 for c in cells if c.n_measurements >= 2)
    churning = sum(1 for c in cells if c.distinct_paths >= 2)
    fraction = churning / multi if multi else None
    return ChurnReport(
        granularity=granularity,
        cells=cells,
        fraction_churning=fraction,
        histogram=histogram,
        multi_measurement_cells=multi,
        churning_cells=churning,
    )


def ablate_churn(
    pairs: Sequence[tuple[MeasurementRecord, AsPath]],
) -> list[tuple[MeasurementRecord, AsPath]]:
    """Strip path churn: per (vantage AS, destination AS) pair keep only the
    measurements taken over the chronologically first inferred path."""
    indexed = sorted(enumerate(pairs), key=lambda t: (t[1][0].timestamp, t[0]))
    first: dict[tuple[int, int], AsPath] = {}
    kept: list[tuple[MeasurementRecord, AsPath]] = []
    for _, (record, path) in indexed:
        pair_key = (record.vantage_asn, path.dst_asn)
        anchor = first.setdefault(pair_key, path)
        if path == anchor:
            kept.append((record, path))
    return kept


# ---------------------------------------------------------------------------
# solution-share tables


def solution_rows_by_granularity(
    summaries: Sequence[SolutionSummary], cap: int
) -> list[dict]:
    return _solution_rows(summaries, cap, by_anomaly=False)


def solution_rows_by_anomaly(summaries: Sequence[SolutionSummary], cap: int) -> list[dict]:
    return _solution_rows(summaries, cap, by_anomaly=True)


def _solution_rows(
    summaries: Sequence[SolutionSummary], cap: int, by_anomaly: bool
) -> list[dict]:
    groups: dict[str, list[SolutionSummary]] = {}
    for summary in summaries:
        group = (
            summary.key.anomaly.value if by_anomaly else summary.key.granularity.value
        )
        groups.setdefault(group, []).append(summary)
    if by_anomaly:
        order = sorted(groups)
    else:
        order = sorted(groups, key=lambda g: TimeGranularity(g).sort_index)
    rows = []
    for group in order:
        members = groups[group]
        total = len(members)
        unsat = sum(1 for s in members if s.status is SolutionStatus.UNSAT)
        unique = sum(1 for s in members if s.status is SolutionStatus.UNIQUE)
        multiple = sum(1 for s in members if s.status is SolutionStatus.MULTIPLE)
        at_cap = sum(1 for s in members if s.model_count_capped >= cap)
        rows.append(
            {
                ("anomaly" if by_anomaly else "granularity"): group,
                "cnf_count": total,
                "unsat": unsat,
                "unique": unique,
                "multiple": multiple,
                "at_cap": at_cap,
                "share_unsat": unsat / total,
                "share_unique": unique / total,
                "share_multiple": multiple / total,
                "share_at_cap": at_cap / total,
            }
        )
    return rows
