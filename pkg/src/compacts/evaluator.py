"""Reference evaluator: norm instance states from a verified chain.

Reads the active chain and a compact, computes every norm instance's
lifecycle state, and never writes anything back. Events are processed in
Position order. At each step: counts-as facts first, then a fixpoint of
instance creation, lifecycle transitions and governance activation (state
changes surface as derived facts that later create conditions can match).
Deadline and expiry lapses fire at block boundaries, at the first block whose
height strictly exceeds the anchor height plus the allowance; boundary
positions carry offset -1.

This module recomputes condition matches from the full prefix at every step.
The incremental engine in incremental.py reaches the same states through
cached match sets; their agreement is a tested property, so keep the two
implementations independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from .governance import EMPTY_ORGANIZATION, Organization, counts_as_facts_for_event
from .lang import ast
from .lang.checks import check_well_formedness
from .ledger import Chain, Event, Position, Scalar, verify_chain
from .matching import (
    Bindings,
    DerivedFact,
    Match,
    bindings_sort_key,
    match_condition,
    norm_state_fact_name,
)


class ChainInvalid(Exception):
    """The chain failed verification; evaluation refuses to proceed."""


class SpecIllFormed(Exception):
    """The compact has well-formedness errors; evaluation refuses to proceed."""


class NormState(Enum):
    ACTIVE = "active"
    DETACHED = "detached"
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    EXPIRED = "expired"


TERMINAL_STATES = frozenset({NormState.SATISFIED, NormState.VIOLATED, NormState.EXPIRED})


@dataclass(frozen=True)
class NormInstance:
    """One binding of a norm's variables with its lifecycle state."""

    norm_id: str
    key_bindings: Bindings
    state: NormState
    created_at: Position
    detached_at: Optional[Position] = None
    closed_at: Optional[Position] = None
    violating_event: Optional[str] = None

    @property
    def key(self) -> tuple[str, Bindings]:
        return (self.norm_id, self.key_bindings)

    @property
    def binding_map(self) -> dict[str, Scalar]:
        return dict(self.key_bindings)

    def is_terminal(self) -> bool:
        return self.state in TERMINAL_STATES


@dataclass(frozen=True)
class EvalState:
    """Everything the evaluator concluded from a processed chain prefix."""

    spec: ast.CompactSpec
    org: Organization
    instances: dict[tuple[str, Bindings], NormInstance]
    facts: tuple[DerivedFact, ...]
    frontier: Position
    trace: tuple[tuple[Position, Event], ...]
    caches: object = field(default=None, compare=False, repr=False)

    def instances_in_order(self) -> list[NormInstance]:
        return sorted(
            self.instances.values(),
            key=lambda i: (i.norm_id, bindings_sort_key(i.key_bindings)),
        )


def _sort_facts(facts: Iterable[DerivedFact]) -> tuple[DerivedFact, ...]:
    return tuple(
        sorted(
            facts,
            key=lambda f: (
                f.witness.block_index,
                f.witness.offset_in_block,
                f.name,
                bindings_sort_key(f.bindings),
            ),
        )
    )


class _Run:
    """Mutable working state of one batch evaluation."""

    def __init__(self, spec: ast.CompactSpec, org: Organization):
        self.spec = spec
        self.org = org
        self.trace: list[tuple[Position, Event]] = []
        self.facts: list[DerivedFact] = []
        self._fact_keys: set[tuple[str, Bindings]] = set()
        self.instances: dict[tuple[str, Bindings], NormInstance] = {}

    def add_fact(self, fact: DerivedFact) -> bool:
        key = (fact.name, fact.bindings)
        if key in self._fact_keys:
            return False
        self._fact_keys.add(key)
        self.facts.append(fact)
        return True

    # --- lifecycle -----------------------------------------------------

    def process_boundary(self, height: int) -> None:
        now = Position(height, -1)
        self._lapse(height, now)
        self._fixpoint(now)

    def process_event(self, pos: Position, event: Event) -> None:
        self.trace.append((pos, event))
        for fact in counts_as_facts_for_event(pos, event, self.spec.counts_as, self.org):
            self.add_fact(fact)
        self._fixpoint(pos)

    def _lapse(self, height: int, now: Position) -> None:
        for key, inst in list(self.instances.items()):
            norm = self.spec.norm(inst.norm_id)
            if norm.kind != ast.COMMITMENT or inst.is_terminal():
                continue
            if (
                inst.state is NormState.ACTIVE
                and norm.expiry_blocks is not None
                and height > inst.created_at.block_index + norm.expiry_blocks
            ):
                self._transition(key, replace(inst, state=NormState.EXPIRED, closed_at=now), now)
            elif (
                inst.state is NormState.DETACHED
                and height > inst.detached_at.block_index + norm.deadline_blocks
            ):
                self._transition(key, replace(inst, state=NormState.VIOLATED, closed_at=now), now)

    def _fixpoint(self, now: Position) -> None:
        changed = True
        while changed:
            changed = self._spawn(now)
            if self._transitions(now):
                changed = True

    def _spawn(self, now: Position) -> bool:
        changed = False
        for norm in self.spec.norms:
            for match in match_condition(norm.create, self.trace, self.facts, None, now):
                key = (norm.id, match.bindings)
                if key in self.instances:
                    continue
                detach_on_create = norm.kind == ast.COMMITMENT and norm.antecedent is None
                self.instances[key] = NormInstance(
                    norm_id=norm.id,
                    key_bindings=match.bindings,
                    state=NormState.DETACHED if detach_on_create else NormState.ACTIVE,
                    created_at=match.witness,
                    detached_at=match.witness if detach_on_create else None,
                )
                if detach_on_create:
                    self._emit(norm.id, match.bindings, NormState.DETACHED, match.witness)
                changed = True
        return changed

    def _transitions(self, now: Position) -> bool:
        changed = False
        for key, inst in list(self.instances.items()):
            if inst.is_terminal():
                continue
            norm = self.spec.norm(inst.norm_id)
            if norm.kind == ast.COMMITMENT:
                changed |= self._step_commitment(key, inst, norm, now)
            else:
                changed |= self._step_prohibition(key, inst, norm, now)
        return changed

    def _step_commitment(
        self, key, inst: NormInstance, norm: ast.NormDecl, now: Position
    ) -> bool:
        base = inst.binding_map
        if inst.state is NormState.ACTIVE and norm.antecedent is not None:
            matches = match_condition(norm.antecedent, self.trace, self.facts, base, now)
            if matches:
                at = max(inst.created_at, matches[0].witness)
                self._transition(key, replace(inst, state=NormState.DETACHED, detached_at=at), at)
                return True
        matches = match_condition(norm.consequent, self.trace, self.facts, base, now)
        if matches:
            at = max(inst.created_at, matches[0].witness)
            updated = replace(
                inst,
                state=NormState.SATISFIED,
                closed_at=at,
                # early performance discharges straight from Active; the
                # commitment is consummated at its discharge point
                detached_at=inst.detached_at if inst.detached_at is not None else at,
            )
            self._transition(key, updated, at)
            return True
        return False

    def _step_prohibition(
        self, key, inst: NormInstance, norm: ast.NormDecl, now: Position
    ) -> bool:
        base = inst.binding_map
        violation = self._first_unexempted(inst, norm, now)
        closure: Optional[Match] = None
        if norm.until is not None:
            for match in match_condition(norm.until, self.trace, self.facts, base, now):
                if inst.created_at <= match.witness:
                    closure = match
                    break
        if violation is not None and (closure is None or not closure.witness < violation.witness):
            event_id = self._event_at(violation.witness)
            self._transition(
                key,
                replace(
                    inst,
                    state=NormState.VIOLATED,
                    closed_at=violation.witness,
                    violating_event=event_id,
                ),
                violation.witness,
            )
            return True
        if closure is not None:
            self._transition(
                key, replace(inst, state=NormState.SATISFIED, closed_at=closure.witness), closure.witness
            )
            return True
        return False

    def _first_unexempted(
        self, inst: NormInstance, norm: ast.NormDecl, now: Position
    ) -> Optional[Match]:
        """Earliest forbidden match in force and not covered by an exemption
        at a strictly earlier position. Exemptions may predate creation;
        forbidden acts before creation are out of scope."""
        base = inst.binding_map
        for match in match_condition(norm.forbids, self.trace, self.facts, base, now):
            if match.witness < inst.created_at:
                continue
            if norm.exemption is not None:
                merged = dict(match.bindings)
                covers = any(
                    m.witness < match.witness
                    for m in match_condition(norm.exemption, self.trace, self.facts, merged, now)
                )
                if covers:
                    continue
            return match
        return None

    def _event_at(self, pos: Position) -> Optional[str]:
        for p, event in self.trace:
            if p == pos:
                return event.event_id
        return None

    def _transition(self, key, updated: NormInstance, at: Position) -> None:
        self.instances[key] = updated
        self._emit(updated.norm_id, updated.key_bindings, updated.state, at)

    def _emit(self, norm_id: str, bindings: Bindings, state: NormState, at: Position) -> None:
        self.add_fact(DerivedFact(norm_state_fact_name(state.value, norm_id), bindings, at))

    def freeze(self, frontier: Position) -> EvalState:
        return EvalState(
            spec=self.spec,
            org=self.org,
            instances=dict(self.instances),
            facts=_sort_facts(self.facts),
            frontier=frontier,
            trace=tuple(self.trace),
        )


def ensure_spec_well_formed(spec: ast.CompactSpec) -> None:
    problems = [d for d in check_well_formedness(spec) if d.severity == "error"]
    if problems:
        raise SpecIllFormed("; ".join(d.message for d in problems))


def evaluate(
    chain: Chain,
    spec: ast.CompactSpec,
    org: Organization = EMPTY_ORGANIZATION,
) -> EvalState:
    """Batch evaluation of a whole chain, from genesis."""
    bad = verify_chain(chain)
    if bad is not None:
        raise ChainInvalid(f"block {bad.index}: {bad.rejection}")
    ensure_spec_well_formed(spec)
    run = _Run(spec, org)
    frontier = Position(0, -1)
    for block in chain.blocks:
        height = block.header.index
        run.process_boundary(height)
        frontier = Position(height, -1)
        for offset, event in enumerate(block.events):
            pos = Position(height, offset)
            run.process_event(pos, event)
            frontier = pos
    return run.freeze(frontier)


def new_instances_for_state(state: EvalState, spec: ast.CompactSpec) -> list[NormInstance]:
    """One creation pass over an existing state (see governance_step)."""
    created: list[NormInstance] = []
    seen = set(state.instances.keys())
    for norm in spec.norms:
        for match in match_condition(norm.create, state.trace, state.facts, None, state.frontier):
            key = (norm.id, match.bindings)
            if key in seen:
                continue
            seen.add(key)
            detach_on_create = norm.kind == ast.COMMITMENT and norm.antecedent is None
            created.append(
                NormInstance(
                    norm_id=norm.id,
                    key_bindings=match.bindings,
                    state=NormState.DETACHED if detach_on_create else NormState.ACTIVE,
                    created_at=match.witness,
                    detached_at=match.witness if detach_on_create else None,
                )
            )
    return created


def resolve_party(
    clause: ast.RoleClause,
    instance: NormInstance,
    org: Organization,
) -> Optional[str]:
    """Principal playing a subject/object role for one instance.

    ``Role: var`` takes the instance binding of var; a bare role resolves
    only if exactly one principal holds it in the context.
    """
    if clause.variable is not None:
        value = instance.binding_map.get(clause.variable)
        return value if isinstance(value, str) else None
    holders = org.holders(clause.role)
    if len(holders) == 1:
        return holders[0]
    return None


def query_instances(
    state: EvalState,
    norm_id: Optional[str] = None,
    lifecycle: Optional[NormState] = None,
    principal: Optional[str] = None,
) -> list[NormInstance]:
    """Filtered instance table in stable (norm_id, bindings) order."""
    out = []
    for inst in state.instances_in_order():
        if norm_id is not None and inst.norm_id != norm_id:
            continue
        if lifecycle is not None and inst.state is not lifecycle:
            continue
        if principal is not None:
            norm = state.spec.norm(inst.norm_id)
            parties = {
                resolve_party(norm.subject, inst, state.org),
                resolve_party(norm.object, inst, state.org),
            }
            if principal not in parties:
                continue
        out.append(inst)
    return out
