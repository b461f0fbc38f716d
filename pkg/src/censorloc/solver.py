"""SAT machinery for bucket CNFs.

Variables are positive integers (ASNs in the pipeline, 1..n for DIMACS
input); a clause is a tuple of signed variables. Pipeline CNFs have a
restricted shape: every clause is all-positive or a negative unit, which
admits a linear-time satisfiability check and cheap counting. A general
DPLL path sits behind the fast path for anything else (externally supplied
DIMACS, blocking clauses during enumeration).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import (
    BackboneStatus,
    CnfInstance,
    SolutionStatus,
    SolutionSummary,
)
from .tomography import to_cnf_clauses

Assignment = dict[int, bool]
ClauseTuple = tuple[int, ...]

DEFAULT_MODEL_CAP = 5
BRUTE_FORCE_MAX_VARS = 20

# residual enumeration bail-out: beyond this many free variables the
# blocking-clause path is used instead of direct enumeration
_RESIDUAL_ENUM_LIMIT = 20


def _check_inputs(variables: Sequence[int], clauses: Sequence[ClauseTuple]) -> None:
    vars_set = set(variables)
    if len(vars_set) != len(variables):
        raise ValueError("duplicate variables")
    for v in vars_set:
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise ValueError(f"variables must be positive integers, got {v!r}")
    for clause in clauses:
        for lit in clause:
            if lit == 0 or abs(lit) not in vars_set:
                raise ValueError(f"literal {lit} not over the declared variables")


def is_restricted_shape(clauses: Sequence[ClauseTuple]) -> bool:
    """True when every clause is all-positive or a single negative literal."""
    for clause in clauses:
        if len(clause) == 1 and clause[0] < 0:
            continue
        if not all(lit > 0 for lit in clause):
            return False
    return True


def _solve_restricted(
    variables: Sequence[int], clauses: Sequence[ClauseTuple]
) -> Assignment | None:
    # propagate negative units, then every positive clause must keep a
    # literal that can still be true; the residual is satisfied all-true
    forced_false: set[int] = set()
    for clause in clauses:
        if len(clause) == 1 and clause[0] < 0:
            forced_false.add(-clause[0])
    for clause in clauses:
        if len(clause) == 1 and clause[0] < 0:
            continue
        if all(lit in forced_false for lit in clause):
            return None
    return {v: v not in forced_false for v in variables}


def _solve_dpll(
    variables: Sequence[int], clauses: Sequence[ClauseTuple]
) -> Assignment | None:
    order = sorted(variables)

    def solve(working: list[ClauseTuple], assigned: Assignment) -> Assignment | None:
        working = list(working)
        assigned = dict(assigned)
        while True:
            unit = None
            for clause in working:
                if not clause:
                    return None
                if len(clause) == 1:
                    unit = clause[0]
                    break
            if unit is None:
                break
            assigned[abs(unit)] = unit > 0
            simplified: list[ClauseTuple] = []
            for clause in working:
                if unit in clause:
                    continue
                if -unit in clause:
                    clause = tuple(lit for lit in clause if lit != -unit)
                simplified.append(clause)
            working = simplified
        if not working:
            # every clause satisfied; unconstrained variables default true
            return {v: assigned.get(v, True) for v in order}
        branch = min(abs(lit) for clause in working for lit in clause)
        for value in (True, False):
            lit = branch if value else -branch
            result = solve(working + [(lit,)], assigned)
            if result is not None:
                return result
        return None

    return solve([tuple(c) for c in clauses], {})


def check_sat(
    variables: Sequence[int],
    clauses: Sequence[ClauseTuple],
    use_general: bool = False,
) -> tuple[bool, Assignment | None]:
    """Satisfiability plus a witness assignment when satisfiable."""
    _check_inputs(variables, clauses)
    if not use_general and is_restricted_shape(clauses):
        witness = _solve_restricted(variables, clauses)
    else:
        witness = _solve_dpll(variables, clauses)
    return witness is not None, witness


def compute_backbone(
    variables: Sequence[int],
    clauses: Sequence[ClauseTuple],
    use_general: bool = False,
) -> dict[int, BackboneStatus]:
    """Per-variable forced role via SAT probes; empty map when unsatisfiable.

    A variable seen true in the witness can only be ForcedTrue (probe with
    the negated literal); seen false, only ForcedFalse. One probe each.
    """
    sat, witness = check_sat(variables, clauses, use_general=use_general)
    if not sat:
        return {}
    assert witness is not None
    base = list(clauses)
    backbone: dict[int, BackboneStatus] = {}
    for v in sorted(variables):
        if witness[v]:
            probe_sat, _ = check_sat(variables, base + [(-v,)], use_general=use_general)
            backbone[v] = BackboneStatus.FORCED_TRUE if not probe_sat else BackboneStatus.FREE
        else:
            probe_sat, _ = check_sat(variables, base + [(v,)], use_general=use_general)
            backbone[v] = BackboneStatus.FORCED_FALSE if not probe_sat else BackboneStatus.FREE
    return backbone


def _count_blocking(
    variables: Sequence[int], clauses: Sequence[ClauseTuple], cap: int
) -> int:
    # enumerate models, blocking each full assignment, until the cap
    count = 0
    working = list(clauses)
    ordered = sorted(variables)
    while count < cap:
        sat, witness = check_sat(variables, working, use_general=True)
        if not sat:
            break
        count += 1
        working.append(tuple(-v if witness[v] else v for v in ordered))
    return count


def _count_restricted(
    variables: Sequence[int],
    clauses: Sequence[ClauseTuple],
    cap: int,
    backbone: dict[int, BackboneStatus],
) -> int:
    # counting over free variables after backbone fixing
    free = sorted(v for v, s in backbone.items() if s is BackboneStatus.FREE)
    m = len(free)
    # Every residual clause keeps >= 2 free literals (a singleton would have
    # been forced true), so all-true plus each single-flip assignment are
    # models: at least m + 1 in total.
    if m + 1 >= cap:
        return cap
    if m > _RESIDUAL_ENUM_LIMIT:
        return _count_blocking(variables, clauses, cap)
    free_index = {v: i for i, v in enumerate(free)}
    residual: list[tuple[int, ...]] = []
    for clause in clauses:
        if len(clause) == 1 and clause[0] < 0:
            continue
        if any(backbone[lit] is BackboneStatus.FORCED_TRUE for lit in clause):
            continue
        reduced = tuple(free_index[lit] for lit in clause if backbone[lit] is BackboneStatus.FREE)
        assert reduced, "unsatisfied clause under a satisfiable backbone"
        residual.append(reduced)
    count = 0
    for bits in range(1 << m):
        if all(any(bits >> i & 1 for i in clause) for clause in residual):
            count += 1
            if count == cap:
                break
    return count


def count_models(
    variables: Sequence[int],
    clauses: Sequence[ClauseTuple],
    cap: int = DEFAULT_MODEL_CAP,
    use_general: bool = False,
) -> int:
    """min(number of models, cap). Counting never proceeds past the cap."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    sat, _ = check_sat(variables, clauses, use_general=use_general)
    if not sat:
        return 0
    if not use_general and is_restricted_shape(clauses):
        backbone = compute_backbone(variables, clauses)
        return _count_restricted(variables, clauses, cap, backbone)
    return _count_blocking(variables, clauses, cap)


def brute_force_models(
    variables: Sequence[int],
    clauses: Sequence[ClauseTuple],
    max_vars: int = BRUTE_FORCE_MAX_VARS,
) -> list[Assignment]:
    """Exact model set by exhaustive enumeration of all 2^n assignments.

    Oracle for the solver paths; shares no logic with them. Refuses more
    than max_vars variables.
    """
    _check_inputs(variables, clauses)
    ordered = sorted(set(variables))
    n = len(ordered)
    if n > max_vars:
        raise ValueError(f"brute force refuses {n} variables (max {max_vars})")
    index = {v: i for i, v in enumerate(ordered)}
    space = np.arange(1 << n, dtype=np.uint64)
    ok = np.ones(1 << n, dtype=bool)
    for clause in clauses:
        pos_mask = 0
        neg_mask = 0
        for lit in clause:
            if lit > 0:
                pos_mask |= 1 << index[lit]
            else:
                neg_mask |= 1 << index[-lit]
        satisfied = ((space & np.uint64(pos_mask)) != 0) | (
            (~space & np.uint64(neg_mask)) != 0
        )
        ok &= satisfied
    models: list[Assignment] = []
    for raw in np.nonzero(ok)[0]:
        bits = int(raw)
        models.append({v: bool(bits >> i & 1) for v, i in index.items()})
    return models


def classify(instance: CnfInstance, cap: int = DEFAULT_MODEL_CAP) -> SolutionSummary:
    """Solve one bucket CNF: status, capped model count, backbone."""
    # a cap of 1 cannot tell unique (exactly 1) from multiple (stopped at 1)
    if cap < 2:
        raise ValueError("cap must be >= 2")
    clauses = to_cnf_clauses(instance)
    variables = instance.variables
    sat, witness = check_sat(variables, clauses)
    if not sat:
        return SolutionSummary(
            key=instance.key,
            status=SolutionStatus.UNSAT,
            model_count_capped=0,
            backbone={},
        )
    backbone = compute_backbone(variables, clauses)
    if is_restricted_shape(clauses):
        count = _count_restricted(variables, clauses, cap, backbone)
    else:
        count = _count_blocking(variables, clauses, cap)
    status = SolutionStatus.UNIQUE if count == 1 else SolutionStatus.MULTIPLE
    if status is SolutionStatus.UNIQUE:
        # the one model must coincide with the forced-true set
        assert witness is not None
        assert all(s is not BackboneStatus.FREE for s in backbone.values())
        assert all(
            witness[v] == (backbone[v] is BackboneStatus.FORCED_TRUE) for v in variables
        )
    return SolutionSummary(
        key=instance.key,
        status=status,
        model_count_capped=count,
        backbone=backbone,
    )


# ---------------------------------------------------------------------------
# DIMACS


def parse_dimacs(text: str) -> tuple[int, list[ClauseTuple]]:
    """Parse DIMACS CNF; returns (declared variable count, clauses)."""
    n_vars: int | None = None
    clauses: list[ClauseTuple] = []
    pending: list[int] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("p"):
            if n_vars is not None:
                raise ValueError("duplicate DIMACS header")
            parts = stripped.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"malformed DIMACS header: {stripped!r}")
            try:
                n_vars = int(parts[2])
                declared_clauses = int(parts[3])
            except ValueError:
                raise ValueError(f"malformed DIMACS header: {stripped!r}") from None
            if n_vars < 0 or declared_clauses < 0:
                raise ValueError(f"malformed DIMACS header: {stripped!r}")
            continue
        if n_vars is None:
            raise ValueError("DIMACS clause before header")
        for token in stripped.split():
            try:
                lit = int(token)
            except ValueError:
                raise ValueError(f"bad DIMACS literal: {token!r}") from None
            if lit == 0:
                clauses.append(tuple(pending))
                pending = []
            else:
                if abs(lit) > n_vars:
                    raise ValueError(f"literal {lit} exceeds declared variable count")
                pending.append(lit)
    if n_vars is None:
        raise ValueError("missing DIMACS header")
    if pending:
        clauses.append(tuple(pending))
    return n_vars, clauses


def solve_dimacs_text(text: str, cap: int = DEFAULT_MODEL_CAP) -> dict:
    """Solve external DIMACS input; the JSON body printed by solve-dimacs."""
    if cap < 2:
        raise ValueError("cap must be >= 2")
    n_vars, clauses = parse_dimacs(text)
    variables = tuple(range(1, n_vars + 1))
    count = count_models(variables, clauses, cap)
    if count == 0:
        return {"status": SolutionStatus.UNSAT.value, "count_capped": 0, "backbone": {}}
    backbone = compute_backbone(variables, clauses)
    status = SolutionStatus.UNIQUE if count == 1 else SolutionStatus.MULTIPLE
    return {
        "status": status.value,
        "count_capped": count,
        "backbone": {str(v): backbone[v].value for v in sorted(backbone)},
    }
