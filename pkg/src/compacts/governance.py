"""Organizational contexts, counts-as rules and governance plumbing.

The organizational context is a principal like any other: it holds roles,
appears as a norm's subject or object, and adjudicates through ordinary
events. Counts-as rules turn an authorized member's assertion into an
institutional fact; norm violations surface as derived facts that activate
the context's governance norms. Derived facts are never written to the
chain: every party recomputes them deterministically.

Complaint, Sanction and Exoneration schemas are built in (see
docs/governance.md) and auto-registered for any compact that does not
declare its own versions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .lang import ast
from .ledger import Event, Position, Scalar
from .matching import DerivedFact, freeze_bindings, match_event_pattern
from .validator import Channel, IntegrityRuleSet, Parameter, SchemaDecl


class UnrosteredEmitter(Exception):
    """The emitter is not an approved principal of the network."""


@dataclass(frozen=True)
class Organization:
    """A context principal with a static role map for its members."""

    id: str
    members: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @staticmethod
    def make(org_id: str, members: Mapping[str, Sequence[str]]) -> "Organization":
        return Organization(
            id=org_id,
            members=tuple(sorted((pid, tuple(sorted(roles))) for pid, roles in members.items())),
        )

    def roles_of(self, principal: str) -> tuple[str, ...]:
        for pid, roles in self.members:
            if pid == principal:
                return roles
        return ()

    def has_role(self, principal: str, role: str) -> bool:
        return role in self.roles_of(principal)

    def holders(self, role: str) -> tuple[str, ...]:
        return tuple(pid for pid, roles in self.members if role in roles)


EMPTY_ORGANIZATION = Organization(id="", members=())


def governance_norms(spec: ast.CompactSpec, org: Organization) -> tuple[str, ...]:
    """Norm ids whose subject or object is the organization itself."""
    ids = []
    for norm in spec.norms:
        if org.has_role(org.id, norm.subject.role) or org.has_role(org.id, norm.object.role):
            ids.append(norm.id)
    return tuple(ids)


GOVERNANCE_EVENT_KINDS = ("Complaint", "Sanction", "Exoneration")

BUILTIN_GOVERNANCE_SCHEMAS: tuple[SchemaDecl, ...] = (
    SchemaDecl(
        event_type="Complaint",
        parameters=(Parameter("case", "text", "key"),),
    ),
    SchemaDecl(
        event_type="Sanction",
        parameters=(Parameter("case", "text", "key"), Parameter("against", "text", "out")),
    ),
    SchemaDecl(
        event_type="Exoneration",
        parameters=(Parameter("case", "text", "key"), Parameter("against", "text", "out")),
    ),
)


def ruleset_from_spec(spec: ast.CompactSpec) -> IntegrityRuleSet:
    """Build the admission rule set of a compact.

    Built-in governance schemas are added only for event types the compact
    does not declare itself; they ride a synthetic "governance" channel open
    to every declared role and the context principal.
    """
    declared = {s.event_type for s in spec.schemas}
    extra = tuple(s for s in BUILTIN_GOVERNANCE_SCHEMAS if s.event_type not in declared)
    channels = spec.channels
    if extra:
        channels = channels + (
            Channel(
                name="governance",
                members=tuple(spec.roles) + (spec.context,),
                carries=tuple(s.event_type for s in extra),
            ),
        )
    return IntegrityRuleSet(schemas=spec.schemas + extra, channels=channels)


def counts_as_facts_for_event(
    pos: Position,
    event: Event,
    rules: Sequence[ast.CountsAsRule],
    org: Organization,
) -> list[DerivedFact]:
    """Facts one event establishes: source pattern matches and the emitter
    holds the required role in the context."""
    facts: list[DerivedFact] = []
    for rule in rules:
        extended = match_event_pattern(rule.source, event, {})
        if extended is None:
            continue
        if not org.has_role(event.emitter, rule.required_role):
            continue
        projected = {attr: extended[var] for attr, var in rule.projection if var in extended}
        if len(projected) != len(rule.projection):
            continue
        facts.append(DerivedFact(rule.fact, freeze_bindings(projected), pos))
    return facts


def apply_counts_as(
    trace: Sequence[tuple[Position, Event]],
    rules: Sequence[ast.CountsAsRule],
    org: Organization,
) -> list[DerivedFact]:
    """All counts-as facts derivable from a trace prefix, earliest witness
    per (name, bindings)."""
    seen: dict[tuple[str, tuple], DerivedFact] = {}
    for pos, event in trace:
        for fact in counts_as_facts_for_event(pos, event, rules, org):
            seen.setdefault((fact.name, fact.bindings), fact)
    return sorted(seen.values(), key=lambda f: (f.witness.block_index, f.witness.offset_in_block, f.name, f.bindings))


def governance_step(state, spec: ast.CompactSpec):
    """Instances the current derived facts entitle but the state lacks.

    One idempotent pass: a fresh ``violated(...)`` fact (or any other fact)
    matching a norm's create condition spawns an instance per unseen key
    binding. Does not mutate the state; evaluate() runs this to fixpoint
    internally.
    """
    from .evaluator import new_instances_for_state

    return new_instances_for_state(state, spec)


def build_governance_event(
    kind: str,
    bindings: Mapping[str, Scalar],
    emitter: str,
    roster: Mapping[str, str],
    event_id: Optional[str] = None,
    logical_ts: int = 0,
) -> Event:
    """A signed Complaint/Sanction/Exoneration event.

    The event still must pass validator admission like any other; this only
    guarantees shape and a valid keyed-digest signature.
    """
    if kind not in GOVERNANCE_EVENT_KINDS:
        raise ValueError(f"unknown governance event kind: {kind}")
    secret = roster.get(emitter)
    if secret is None:
        raise UnrosteredEmitter(emitter)
    if event_id is None:
        payload = kind + "|" + emitter + "|" + "|".join(
            f"{k}={v!r}" for k, v in sorted(bindings.items())
        )
        event_id = f"{kind.lower()}-{hashlib.sha256(payload.encode()).hexdigest()[:12]}"
    event = Event.make(
        event_id=event_id,
        event_type=kind,
        attributes=bindings,
        emitter=emitter,
        logical_ts=logical_ts,
    )
    return event.with_signature(secret)
