"""Schema admission and information-integrity checks.

The key-conflict expectation below was hand-derived by enumerating the
uniqueness predicate over a minimal two-event trace: equal keys with a
differing out parameter is exactly the rejected shape.
"""

import random

from compacts.ledger import Event
from compacts.validator import (
    Channel,
    IntegrityRuleSet,
    Parameter,
    SchemaDecl,
    check_integrity,
    validate_event_schema,
)

RULES = IntegrityRuleSet(
    schemas=(
        SchemaDecl(
            "InvestigationReport",
            (
                Parameter("case", "text", "key"),
                Parameter("verdict", "text", "out"),
            ),
        ),
        SchemaDecl(
            "Share",
            (
                Parameter("patient", "text", "key"),
                Parameter("sharer", "text", "key"),
            ),
        ),
        SchemaDecl(
            "Followup",
            (
                Parameter("visit", "text", "key"),
                Parameter("patient", "text", "in"),
            ),
        ),
        SchemaDecl(
            "Admit",
            (
                Parameter("patient", "text", "key"),
                Parameter("count", "int", "out"),
                Parameter("urgent", "bool", "out"),
            ),
        ),
    ),
    channels=(
        Channel("clinical", ("bob", "hospital", "Nurse"), ("Share", "Admit", "Followup")),
        Channel("oversight", ("hospital",), ("InvestigationReport",)),
    ),
)


def ev(event_id, event_type, attributes, emitter="hospital"):
    return Event.make(event_id, event_type, attributes, emitter)


def errors_of(result):
    return [e.code for e in result]


def test_matching_event_on_channel_is_ok():
    share = ev("e1", "Share", {"patient": "charlie", "sharer": "bob"}, emitter="bob")
    assert validate_event_schema(share, RULES) == []


def test_unknown_event_type():
    event = ev("e1", "Gossip", {"patient": "charlie"})
    assert errors_of(validate_event_schema(event, RULES)) == ["UnknownEventType"]


def test_kind_mismatch_int_for_text():
    event = ev("e1", "Share", {"patient": 7, "sharer": "bob"}, emitter="bob")
    assert "KindMismatch" in errors_of(validate_event_schema(event, RULES))


def test_bool_is_not_an_int():
    event = ev("e1", "Admit", {"patient": "c", "count": True, "urgent": True})
    assert "KindMismatch" in errors_of(validate_event_schema(event, RULES))


def test_missing_and_extra_attributes():
    event = ev("e1", "Share", {"patient": "charlie", "extra": "x"}, emitter="bob")
    codes = errors_of(validate_event_schema(event, RULES))
    assert "MissingAttribute" in codes
    assert "ExtraAttribute" in codes


def test_emitter_not_on_channel():
    event = ev("e1", "InvestigationReport", {"case": "k1", "verdict": "ok"}, emitter="bob")
    assert "EmitterNotOnChannel" in errors_of(validate_event_schema(event, RULES))


def test_channel_membership_via_role():
    event = ev("e1", "Share", {"patient": "c", "sharer": "dana"}, emitter="dana")
    roles_of = lambda pid: ("Nurse",) if pid == "dana" else ()
    assert validate_event_schema(event, RULES, roles_of) == []
    assert "EmitterNotOnChannel" in errors_of(validate_event_schema(event, RULES))


def test_key_conflict_on_out_parameter():
    first = ev("e1", "InvestigationReport", {"case": "k1", "verdict": "negligent"})
    second = ev("e2", "InvestigationReport", {"case": "k1", "verdict": "excused"})
    violations = check_integrity(second, [first], RULES)
    assert errors_of(violations) == ["KeyConflict"]
    assert "k1" in violations[0].detail


def test_same_keys_same_outs_is_ok():
    first = ev("e1", "InvestigationReport", {"case": "k1", "verdict": "negligent"})
    second = ev("e2", "InvestigationReport", {"case": "k1", "verdict": "negligent"})
    assert check_integrity(second, [first], RULES) == []


def test_unbound_in_parameter():
    followup = ev("e1", "Followup", {"visit": "v1", "patient": "zed"})
    violations = check_integrity(followup, [], RULES)
    assert errors_of(violations) == ["UnboundInParameter"]
    assert "zed" in violations[0].detail


def test_in_parameter_bound_by_earlier_key():
    admit = ev("e0", "Admit", {"patient": "zed", "count": 1, "urgent": False})
    followup = ev("e1", "Followup", {"visit": "v1", "patient": "zed"})
    assert check_integrity(followup, [admit], RULES) == []


def test_byte_identical_replay_is_not_an_integrity_matter():
    # duplicate event ids are the ledger's DuplicateEventId check
    share = ev("e1", "Share", {"patient": "c", "sharer": "bob"}, emitter="bob")
    assert check_integrity(share, [share], RULES) == []


def _random_event(rng, serial):
    event_type = rng.choice(("InvestigationReport", "Share", "Admit", "Followup"))
    if event_type == "InvestigationReport":
        attributes = {"case": rng.choice("abc"), "verdict": rng.choice(("x", "y"))}
    elif event_type == "Share":
        attributes = {"patient": rng.choice("pq"), "sharer": rng.choice(("bob", "dana"))}
    elif event_type == "Admit":
        attributes = {"patient": rng.choice("pq"), "count": rng.randint(0, 3),
                      "urgent": rng.random() < 0.5}
    else:
        attributes = {"visit": f"v{serial}", "patient": rng.choice("pqz")}
    return ev(f"r{serial}", event_type, attributes)


def test_key_conflict_rejection_is_monotone_under_extension():
    """Acceptance 7 property: key conflicts never heal. 1,000 randomized
    prefix extensions of rejected events stay rejected."""
    rng = random.Random(2024)
    checked = 0
    while checked < 1000:
        prefix = [_random_event(rng, i) for i in range(rng.randint(0, 8))]
        candidate = _random_event(rng, 99)
        verdict = check_integrity(candidate, prefix, RULES)
        conflict = [v for v in verdict if v.code == "KeyConflict"]
        if not conflict:
            continue
        for _ in range(rng.randint(1, 5)):
            prefix = prefix + [_random_event(rng, 100 + checked)]
            extended = check_integrity(candidate, prefix, RULES)
            assert any(v.code == "KeyConflict" for v in extended)
            checked += 1


def test_unbound_in_rejection_persists_unless_the_value_is_bound():
    rng = random.Random(77)
    followup = ev("f1", "Followup", {"visit": "v1", "patient": "zed"})
    prefix = []
    for serial in range(200):
        verdict = check_integrity(followup, prefix, RULES)
        binds = any(
            e.event_type == "Admit" and e.get("patient") == "zed" for e in prefix
        )
        if binds:
            assert verdict == []
        else:
            assert errors_of(verdict) == ["UnboundInParameter"]
        prefix.append(_random_event(rng, serial))
        if serial == 120:
            prefix.append(ev("bind", "Admit", {"patient": "zed", "count": 0, "urgent": False}))
