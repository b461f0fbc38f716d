"""Traceroute to AS-path inference.

IP hops are mapped through the prefix table, then collapsed to an AS-level
path anchored at the vantage AS and the destination AS. Records whose
traceroutes cannot be collapsed unambiguously are eliminated, each with a
specific rule, so downstream accounting can show exactly what was dropped.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from ipaddress import AddressValueError, IPv4Address, IPv4Network
from typing import Any, Union

from .ingest import PrefixTable
from .model import AsPath, MeasurementRecord, Traceroute

# Ranges that can never identify a transit AS: RFC1918, loopback, link-local.
_EXCLUDED_RANGES = (
    IPv4Network("10.0.0.0/8"),
    IPv4Network("172.16.0.0/12"),
    IPv4Network("192.168.0.0/16"),
    IPv4Network("127.0.0.0/8"),
    IPv4Network("169.254.0.0/16"),
)


class MappingKind(str, Enum):
    MAPPED = "mapped"
    AMBIGUOUS = "ambiguous"
    UNMAPPED = "unmapped"


@dataclass(frozen=True)
class HopMapping:
    """Result of mapping one IP to origin AS(es)."""

    kind: MappingKind
    origins: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.kind is MappingKind.MAPPED and len(self.origins) != 1:
            raise ValueError("a mapped hop has exactly one origin")
        if self.kind is MappingKind.AMBIGUOUS and len(self.origins) < 2:
            raise ValueError("an ambiguous hop has at least two origins")
        if self.kind is MappingKind.UNMAPPED and self.origins:
            raise ValueError("an unmapped hop has no origins")

    @property
    def asn(self) -> int:
        if self.kind is not MappingKind.MAPPED:
            raise ValueError("only mapped hops carry a single ASN")
        return next(iter(self.origins))


_UNMAPPED = HopMapping(kind=MappingKind.UNMAPPED)


def map_ip(table: PrefixTable, ip: str) -> HopMapping:
    """Longest-prefix match one IP; reserved/private space never maps."""
    try:
        addr = IPv4Address(ip)
    except (AddressValueError, ValueError):
        return _UNMAPPED
    if any(addr in net for net in _EXCLUDED_RANGES):
        return _UNMAPPED
    origins = table.lookup(ip)
    if origins is None:
        return _UNMAPPED
    if len(origins) == 1:
        return HopMapping(kind=MappingKind.MAPPED, origins=origins)
    return HopMapping(kind=MappingKind.AMBIGUOUS, origins=origins)


class InferenceRule(str, Enum):
    """Why a record was eliminated from path inference."""

    MAPPING_IMPOSSIBLE = "mapping_impossible"
    """No hop (or the destination) could be mapped to an AS."""

    TRACEROUTE_ERROR = "traceroute_error"
    """The traceroute never completed or recorded no hops."""

    UNRESOLVABLE_GAP = "unresolvable_gap"
    """A non-responsive or ambiguous stretch sits between two different ASes."""

    MULTIPLE_AS_PATHS = "multiple_as_paths"
    """The record's traceroutes resolved to disagreeing AS paths."""


@dataclass(frozen=True)
class InferenceFailure:
    rule: InferenceRule
    detail: str

    def to_json_obj(self) -> dict[str, str]:
        return {"rule": self.rule.value, "detail": self.detail}


_GAP = None  # token marking a hop that cannot vote for any AS


def collapse_traceroute(
    traceroute: Traceroute,
    table: PrefixTable,
    vantage_asn: int,
    dst_asn: int,
) -> Union[AsPath, InferenceFailure]:
    """Collapse one IP traceroute to an AS path, or explain why it cannot be.

    Non-responsive and ambiguous (multi-origin) hops are gaps. A gap run
    flanked by the same AS on both sides is dropped; flanked by two different
    ASes it hides an unknown AS boundary and the traceroute is eliminated.
    The vantage and destination ASes are appended as virtual endpoints before
    gap resolution, so no gap run can touch either end of the sequence.
    """
    if not traceroute.completed or not traceroute.hops:
        return InferenceFailure(
            rule=InferenceRule.TRACEROUTE_ERROR,
            detail="traceroute incomplete or empty",
        )
    tokens: list[int | None] = []
    mapped_any = False
    for hop in traceroute.hops:
        if not hop.responsive:
            tokens.append(_GAP)
            continue
        mapping = map_ip(table, hop.addr)
        if mapping.kind is MappingKind.MAPPED:
            tokens.append(mapping.asn)
            mapped_any = True
        else:
            tokens.append(_GAP)
    if not mapped_any:
        return InferenceFailure(
            rule=InferenceRule.MAPPING_IMPOSSIBLE,
            detail="no traceroute hop maps to an AS",
        )
    tokens = [vantage_asn, *tokens, dst_asn]

    # resolve gap runs against their mapped neighbours
    resolved: list[int] = []
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if token is not _GAP:
            resolved.append(token)
            i += 1
            continue
        j = i
        while tokens[j] is _GAP:
            j += 1
        left = resolved[-1]
        right = tokens[j]
        if left != right:
            return InferenceFailure(
                rule=InferenceRule.UNRESOLVABLE_GAP,
                detail=f"gap between AS{left} and AS{right}",
            )
        i = j

    collapsed: list[int] = []
    for asn in resolved:
        if not collapsed or collapsed[-1] != asn:
            collapsed.append(asn)
    return AsPath(asns=tuple(collapsed))


def infer_as_path(
    record: MeasurementRecord,
    table: PrefixTable,
) -> Union[AsPath, InferenceFailure]:
    """Infer one AS path for a record from its three traceroutes.

    The destination IP must map to a single AS to anchor the path. Successful
    collapses must all agree; two or more distinct paths eliminate the record,
    and if nothing collapses the first per-traceroute failure is reported.
    """
    dst_mapping = map_ip(table, record.dst_ip)
    if dst_mapping.kind is not MappingKind.MAPPED:
        return InferenceFailure(
            rule=InferenceRule.MAPPING_IMPOSSIBLE,
            detail=f"destination {record.dst_ip} does not map to a single AS",
        )
    dst_asn = dst_mapping.asn

    paths: list[AsPath] = []
    first_failure: InferenceFailure | None = None
    for traceroute in record.traceroutes:
        outcome = collapse_traceroute(traceroute, table, record.vantage_asn, dst_asn)
        if isinstance(outcome, InferenceFailure):
            if first_failure is None:
                first_failure = outcome
        else:
            paths.append(outcome)

    if not paths:
        assert first_failure is not None
        return first_failure
    distinct = sorted({p.asns for p in paths})
    if len(distinct) > 1:
        rendered = "; ".join("-".join(str(a) for a in p) for p in distinct)
        return InferenceFailure(
            rule=InferenceRule.MULTIPLE_AS_PATHS,
            detail=f"traceroutes disagree: {rendered}",
        )
    return AsPath(asns=distinct[0])


def trace_inference(record: MeasurementRecord, table: PrefixTable) -> dict[str, Any]:
    """Debug dump of every mapping step for one record (behind --debug-trace)."""
    dst_mapping = map_ip(table, record.dst_ip)
    traceroutes = []
    for traceroute in record.traceroutes:
        hops = []
        for hop in traceroute.hops:
            if not hop.responsive:
                hops.append({"ttl": hop.ttl_index, "addr": "*", "mapping": "non_responsive"})
                continue
            mapping = map_ip(table, hop.addr)
            hops.append(
                {
                    "ttl": hop.ttl_index,
                    "addr": hop.addr,
                    "mapping": mapping.kind.value,
                    "origins": sorted(mapping.origins),
                }
            )
        if dst_mapping.kind is MappingKind.MAPPED:
            outcome: AsPath | InferenceFailure = collapse_traceroute(
                traceroute, table, record.vantage_asn, dst_mapping.asn
            )
        else:
            outcome = InferenceFailure(
                rule=InferenceRule.MAPPING_IMPOSSIBLE,
                detail=f"destination {record.dst_ip} does not map to a single AS",
            )
        traceroutes.append(
            {
                "completed": traceroute.completed,
                "hops": hops,
                "outcome": outcome.to_json_obj()
                if isinstance(outcome, InferenceFailure)
                else {"path": list(outcome.asns)},
            }
        )
    final = infer_as_path(record, table)
    return {
        "record_id": record.record_id,
        "dst_ip": record.dst_ip,
        "dst_mapping": {
            "kind": dst_mapping.kind.value,
            "origins": sorted(dst_mapping.origins),
        },
        "traceroutes": traceroutes,
        "result": final.to_json_obj()
        if isinstance(final, InferenceFailure)
        else {"path": list(final.asns)},
    }
