"""Incremental evaluation: advance an EvalState one block at a time.

apply_block carries the instance table, fact set and per-condition match
caches forward instead of replaying the chain. Caches hold the full match set
of every norm clause and grow by semi-naive deltas: a new event (or fact)
produces new leaf matches, which join against the other side's existing
matches on the way up the condition tree. Lifecycle decisions then read the
cached sets.

Replay equivalence with the batch evaluator (evaluate(chain) equals folding
apply_block over the blocks) is the correctness contract; the two
implementations share only the leaf pattern semantics.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from .evaluator import (
    EvalState,
    NormInstance,
    NormState,
    _sort_facts,
    ensure_spec_well_formed,
)
from .governance import Organization, counts_as_facts_for_event
from .lang import ast
from .ledger import Block, Event, Position
from .matching import (
    Bindings,
    DerivedFact,
    Match,
    compatible,
    match_event_pattern,
    match_fact_pattern,
    match_sort_key,
    norm_state_fact_name,
)


class NonContiguousBlock(Exception):
    """The block does not directly extend the state's frontier."""


def _merge(a: Bindings, b: Bindings) -> Bindings:
    merged = dict(a)
    merged.update(b)
    return tuple(sorted(merged.items()))


class _CondIndex:
    """Cached match set of one condition, updated by deltas."""

    __slots__ = ("cond", "matches", "_keys", "left", "right")

    def __init__(self, cond: ast.Condition, _empty: bool = False):
        self.cond = cond
        self.matches: list[Match] = []
        self._keys: set[tuple[Bindings, Position]] = set()
        self.left: Optional[_CondIndex] = None
        self.right: Optional[_CondIndex] = None
        if not _empty and isinstance(cond, (ast.And, ast.Or, ast.Before)):
            self.left = _CondIndex(cond.left)
            self.right = _CondIndex(cond.right)

    def clone(self) -> "_CondIndex":
        copy = _CondIndex(self.cond, _empty=True)
        copy.matches = list(self.matches)
        copy._keys = set(self._keys)
        copy.left = self.left.clone() if self.left else None
        copy.right = self.right.clone() if self.right else None
        return copy

    def _absorb(self, candidates: list[Match]) -> list[Match]:
        fresh = []
        for match in candidates:
            key = (match.bindings, match.witness)
            if key not in self._keys:
                self._keys.add(key)
                self.matches.append(match)
                fresh.append(match)
        return fresh

    def add_event(self, pos: Position, event: Event) -> list[Match]:
        return self._advance("event", pos, event, None)

    def add_fact(self, fact: DerivedFact) -> list[Match]:
        return self._advance("fact", fact.witness, None, fact)

    def _advance(self, kind, pos, event, fact) -> list[Match]:
        cond = self.cond
        if isinstance(cond, ast.EventPattern):
            if kind != "event":
                return []
            extended = match_event_pattern(cond, event, {})
            if extended is None:
                return []
            from .matching import freeze_bindings

            return self._absorb([Match(freeze_bindings(extended), pos)])
        if isinstance(cond, (ast.FactPattern, ast.NormStateFactPattern)):
            if kind != "fact":
                return []
            extended = match_fact_pattern(cond, fact, {})
            if extended is None:
                return []
            from .matching import freeze_bindings

            return self._absorb([Match(freeze_bindings(extended), pos)])

        left_before = list(self.left.matches)
        delta_left = self.left._advance(kind, pos, event, fact)
        right_before = list(self.right.matches)
        delta_right = self.right._advance(kind, pos, event, fact)

        if isinstance(cond, ast.Or):
            return self._absorb(delta_left + delta_right)
        if isinstance(cond, ast.And):
            produced = self._join_and(delta_left, right_before + delta_right)
            produced += self._join_and(left_before, delta_right)
            return self._absorb(produced)
        # Before: the left witness must strictly precede the right witness
        produced = self._join_before(delta_left, right_before + delta_right)
        produced += self._join_before(left_before, delta_right)
        return self._absorb(produced)

    @staticmethod
    def _join_and(lefts: list[Match], rights: list[Match]) -> list[Match]:
        out = []
        for lm in lefts:
            left_map = dict(lm.bindings)
            for rm in rights:
                if compatible(left_map, dict(rm.bindings)):
                    witness = rm.witness if lm.witness < rm.witness else lm.witness
                    out.append(Match(_merge(lm.bindings, rm.bindings), witness))
        return out

    @staticmethod
    def _join_before(lefts: list[Match], rights: list[Match]) -> list[Match]:
        out = []
        for lm in lefts:
            left_map = dict(lm.bindings)
            for rm in rights:
                if lm.witness < rm.witness and compatible(left_map, dict(rm.bindings)):
                    out.append(Match(_merge(lm.bindings, rm.bindings), rm.witness))
        return out


class _Caches:
    """Per-(norm, clause) condition indexes carried inside an EvalState."""

    def __init__(self, spec: ast.CompactSpec):
        self.indexes: dict[tuple[str, str], _CondIndex] = {}
        for norm in spec.norms:
            for clause, cond in norm.clauses():
                self.indexes[(norm.id, clause)] = _CondIndex(cond)

    def clone(self) -> "_Caches":
        copy = object.__new__(_Caches)
        copy.indexes = {key: idx.clone() for key, idx in self.indexes.items()}
        return copy

    def add_event(self, pos: Position, event: Event) -> None:
        for idx in self.indexes.values():
            idx.add_event(pos, event)

    def add_fact(self, fact: DerivedFact) -> None:
        for idx in self.indexes.values():
            idx.add_fact(fact)


def initial_state(spec: ast.CompactSpec, org: Organization) -> EvalState:
    """State after the genesis block: nothing seen, frontier at height 0."""
    ensure_spec_well_formed(spec)
    return EvalState(
        spec=spec,
        org=org,
        instances={},
        facts=(),
        frontier=Position(0, -1),
        trace=(),
        caches=_Caches(spec),
    )


class _IncrementalRun:
    def __init__(self, state: EvalState):
        self.spec = state.spec
        self.org = state.org
        self.trace = list(state.trace)
        self.facts = list(state.facts)
        self._fact_keys = {(f.name, f.bindings) for f in self.facts}
        self.instances = dict(state.instances)
        if isinstance(state.caches, _Caches):
            self.caches = state.caches.clone()
        else:
            self.caches = _Caches(state.spec)
            for pos, event in self.trace:
                self.caches.add_event(pos, event)
            for fact in self.facts:
                self.caches.add_fact(fact)

    # --- processing -----------------------------------------------------

    def process_block(self, block: Block) -> Position:
        height = block.header.index
        now = Position(height, -1)
        self._lapse(height, now)
        self._fixpoint(now)
        frontier = now
        for offset, event in enumerate(block.events):
            pos = Position(height, offset)
            self.trace.append((pos, event))
            self.caches.add_event(pos, event)
            for fact in counts_as_facts_for_event(pos, event, self.spec.counts_as, self.org):
                self._add_fact(fact)
            self._fixpoint(pos)
            frontier = pos
        return frontier

    def _add_fact(self, fact: DerivedFact) -> None:
        key = (fact.name, fact.bindings)
        if key in self._fact_keys:
            return
        self._fact_keys.add(key)
        self.facts.append(fact)
        self.caches.add_fact(fact)

    def _clause_matches(self, norm_id: str, clause: str, base: dict) -> list[Match]:
        idx = self.caches.indexes.get((norm_id, clause))
        if idx is None:
            return []
        found = [m for m in idx.matches if compatible(base, dict(m.bindings))]
        return sorted(found, key=match_sort_key)

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
            changed = self._spawn()
            if self._transitions(now):
                changed = True

    def _spawn(self) -> bool:
        changed = False
        for norm in self.spec.norms:
            idx = self.caches.indexes[(norm.id, "create")]
            for match in sorted(idx.matches, key=match_sort_key):
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
                changed |= self._step_commitment(key, inst, norm)
            else:
                changed |= self._step_prohibition(key, inst, norm)
        return changed

    def _step_commitment(self, key, inst: NormInstance, norm: ast.NormDecl) -> bool:
        base = inst.binding_map
        if inst.state is NormState.ACTIVE and norm.antecedent is not None:
            matches = self._clause_matches(norm.id, "antecedent", base)
            if matches:
                at = max(inst.created_at, matches[0].witness)
                self._transition(key, replace(inst, state=NormState.DETACHED, detached_at=at), at)
                return True
        matches = self._clause_matches(norm.id, "consequent", base)
        if matches:
            at = max(inst.created_at, matches[0].witness)
            updated = replace(
                inst,
                state=NormState.SATISFIED,
                closed_at=at,
                detached_at=inst.detached_at if inst.detached_at is not None else at,
            )
            self._transition(key, updated, at)
            return True
        return False

    def _step_prohibition(self, key, inst: NormInstance, norm: ast.NormDecl) -> bool:
        base = inst.binding_map
        violation = None
        for match in self._clause_matches(norm.id, "forbids", base):
            if match.witness < inst.created_at:
                continue
            if norm.exemption is not None:
                merged = dict(base)
                merged.update(dict(match.bindings))
                exemptions = self._clause_matches(norm.id, "exemption", merged)
                if any(m.witness < match.witness for m in exemptions):
                    continue
            violation = match
            break
        closure = None
        if norm.until is not None:
            for match in self._clause_matches(norm.id, "until", base):
                if inst.created_at <= match.witness:
                    closure = match
                    break
        if violation is not None and (closure is None or not closure.witness < violation.witness):
            event_id = None
            for pos, event in self.trace:
                if pos == violation.witness:
                    event_id = event.event_id
                    break
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

    def _transition(self, key, updated: NormInstance, at: Position) -> None:
        self.instances[key] = updated
        self._emit(updated.norm_id, updated.key_bindings, updated.state, at)

    def _emit(self, norm_id: str, bindings: Bindings, state: NormState, at: Position) -> None:
        self._add_fact(DerivedFact(norm_state_fact_name(state.value, norm_id), bindings, at))

    def freeze(self, frontier: Position) -> EvalState:
        return EvalState(
            spec=self.spec,
            org=self.org,
            instances=self.instances,
            facts=_sort_facts(self.facts),
            frontier=frontier,
            trace=tuple(self.trace),
            caches=self.caches,
        )


def apply_block(state: EvalState, block: Block) -> EvalState:
    """Advance a state by exactly the next block; equals batch evaluation of
    the extended prefix."""
    if block.header.index != state.frontier.block_index + 1:
        raise NonContiguousBlock(
            f"frontier at block {state.frontier.block_index}, got block {block.header.index}"
        )
    run = _IncrementalRun(state)
    frontier = run.process_block(block)
    return run.freeze(frontier)
