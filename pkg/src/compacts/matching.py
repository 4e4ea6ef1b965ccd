"""Existential matching of conditions over an ordered event trace.

A match is a consistent assignment of values to a condition's variables plus
the witness position at which the condition completed. Semantics: an event
pattern matches any trace event of its type whose attributes satisfy the
constraints; ``and`` joins compatible matches (witness = the later one);
``or`` unions them; ``before`` requires the left witness to be strictly
earlier than the right and completes at the right witness. Derived-fact
patterns match the fact store the same way events match the trace.

Both the batch evaluator and the incremental engine build on these leaf
semantics; everything above this module is implemented twice, on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from .lang import ast
from .ledger import Event, Position, Scalar

Bindings = tuple[tuple[str, Scalar], ...]  # sorted by variable name


@dataclass(frozen=True)
class DerivedFact:
    """A deterministic conclusion recomputed from the chain, never stored on it.

    Counts-as facts carry their declared name; norm lifecycle facts are named
    ``state(norm_id)`` (e.g. ``violated(P1)``).
    """

    name: str
    bindings: Bindings
    witness: Position

    @property
    def binding_map(self) -> dict[str, Scalar]:
        return dict(self.bindings)


def norm_state_fact_name(state: str, norm_id: str) -> str:
    return f"{state}({norm_id})"


@dataclass(frozen=True)
class Match:
    bindings: Bindings
    witness: Position


def freeze_bindings(bindings: Mapping[str, Scalar]) -> Bindings:
    return tuple(sorted(bindings.items()))


def _scalar_key(value: Scalar) -> tuple[str, str]:
    if isinstance(value, bool):
        return ("b", "1" if value else "0")
    if isinstance(value, int):
        return ("i", f"{value:+021d}")
    return ("s", value)


def bindings_sort_key(bindings: Bindings) -> tuple:
    return tuple((name, *_scalar_key(value)) for name, value in bindings)


def match_sort_key(match: Match) -> tuple:
    return (match.witness.block_index, match.witness.offset_in_block,
            bindings_sort_key(match.bindings))


def compatible(a: Mapping[str, Scalar], b: Mapping[str, Scalar]) -> bool:
    if len(b) < len(a):
        a, b = b, a
    return all(name not in b or b[name] == value for name, value in a.items())


def _extend(
    base: Mapping[str, Scalar],
    constraints: tuple[ast.Constraint, ...],
    values: Mapping[str, Scalar],
) -> Optional[dict[str, Scalar]]:
    """Unify pattern constraints against concrete values, extending base."""
    result = dict(base)
    for constraint in constraints:
        if constraint.attribute not in values:
            return None
        actual = values[constraint.attribute]
        term = constraint.term
        if isinstance(term, ast.Literal):
            if actual != term.value:
                return None
        else:
            bound = result.get(term.name)
            if bound is None:
                result[term.name] = actual
            elif bound != actual:
                return None
    return result


def match_event_pattern(
    pattern: ast.EventPattern,
    event: Event,
    base: Mapping[str, Scalar],
) -> Optional[dict[str, Scalar]]:
    if event.event_type != pattern.event_type:
        return None
    return _extend(base, pattern.constraints, event.attribute_map)


def match_fact_pattern(
    pattern: Union[ast.FactPattern, ast.NormStateFactPattern],
    fact: DerivedFact,
    base: Mapping[str, Scalar],
) -> Optional[dict[str, Scalar]]:
    if isinstance(pattern, ast.FactPattern):
        wanted = pattern.fact
    else:
        wanted = norm_state_fact_name(pattern.state, pattern.norm_id)
    if fact.name != wanted:
        return None
    return _extend(base, pattern.constraints, fact.binding_map)


def _dedup_sorted(matches: Iterable[Match]) -> list[Match]:
    unique = {(m.bindings, m.witness): m for m in matches}
    return sorted(unique.values(), key=match_sort_key)


def match_condition(
    condition: ast.Condition,
    trace: Sequence[tuple[Position, Event]],
    facts: Sequence[DerivedFact] = (),
    bindings: Optional[Mapping[str, Scalar]] = None,
    now: Optional[Position] = None,
) -> list[Match]:
    """All binding extensions under which the condition holds at or before now.

    Returned matches are deduplicated and sorted by (witness, bindings), so
    the first element is the earliest completion.
    """
    base = dict(bindings) if bindings else {}
    return _dedup_sorted(_match(condition, trace, facts, base, now))


def _match(
    condition: ast.Condition,
    trace: Sequence[tuple[Position, Event]],
    facts: Sequence[DerivedFact],
    base: Mapping[str, Scalar],
    now: Optional[Position],
) -> list[Match]:
    if isinstance(condition, ast.EventPattern):
        out = []
        for pos, event in trace:
            if now is not None and not pos <= now:
                continue
            extended = match_event_pattern(condition, event, base)
            if extended is not None:
                out.append(Match(freeze_bindings(extended), pos))
        return out
    if isinstance(condition, (ast.FactPattern, ast.NormStateFactPattern)):
        out = []
        for fact in facts:
            if now is not None and not fact.witness <= now:
                continue
            extended = match_fact_pattern(condition, fact, base)
            if extended is not None:
                out.append(Match(freeze_bindings(extended), fact.witness))
        return out
    if isinstance(condition, ast.And):
        out = []
        for left in _match(condition.left, trace, facts, base, now):
            for right in _match(condition.right, trace, facts, dict(left.bindings), now):
                out.append(Match(right.bindings, max(left.witness, right.witness, key=_pos_key)))
        return out
    if isinstance(condition, ast.Or):
        return _match(condition.left, trace, facts, base, now) + _match(
            condition.right, trace, facts, base, now
        )
    if isinstance(condition, ast.Before):
        out = []
        for left in _match(condition.left, trace, facts, base, now):
            for right in _match(condition.right, trace, facts, dict(left.bindings), now):
                if left.witness < right.witness:
                    out.append(Match(right.bindings, right.witness))
        return out
    raise TypeError(f"not a condition: {type(condition).__name__}")


def _pos_key(pos: Position) -> tuple[int, int]:
    return (pos.block_index, pos.offset_in_block)
