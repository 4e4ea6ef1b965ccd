"""Parser, pretty printer, round-trips, error locality."""

import glob
import random

import pytest

from compacts.lang import (
    And,
    Before,
    EventPattern,
    FactPattern,
    Literal,
    NormStateFactPattern,
    Or,
    ParseError,
    parse_compact,
    pretty_print,
)
from compacts.lang.parser import tokenize

from conftest import DEMOS

CORPUS = sorted(glob.glob(str(DEMOS / "*.cpt")))


def test_corpus_is_large_enough():
    assert len(CORPUS) >= 10


@pytest.mark.parametrize("path", CORPUS)
def test_round_trip_identity(path):
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    spec = parse_compact(text)
    printed = pretty_print(spec)
    assert parse_compact(printed) == spec


@pytest.mark.parametrize("path", CORPUS)
def test_pretty_print_is_canonical(path):
    with open(path, "r", encoding="utf-8") as handle:
        spec = parse_compact(handle.read())
    once = pretty_print(spec)
    again = pretty_print(parse_compact(once))
    assert once == again


def test_hospital_example_structure(hospital_spec):
    assert hospital_spec.name == "HospitalCare"
    assert hospital_spec.context == "hospital"
    assert [n.id for n in hospital_spec.norms] == ["P1", "C1"]
    p1, c1 = hospital_spec.norms
    assert p1.kind == "prohibition"
    assert p1.forbids.event_type == "Share"
    assert p1.exemption.event_type == "Consent"
    assert p1.until.event_type == "Discharge"
    assert c1.kind == "commitment"
    assert isinstance(c1.create, NormStateFactPattern)
    assert c1.create.state == "violated"
    assert c1.create.norm_id == "P1"
    assert c1.deadline_blocks == 100


def test_empty_input_fails_at_1_1():
    with pytest.raises(ParseError) as err:
        parse_compact("")
    assert (err.value.line, err.value.col) == (1, 1)


def test_empty_roles_prints_bare_roles_line():
    spec = parse_compact("compact T context c { roles; schema A(x: text key); "
                         "channel m members c carries A; }")
    assert "\n  roles;\n" in pretty_print(spec)


def test_condition_precedence_or_and_before():
    text = """compact T context c {
      roles R;
      schema A(x: text key);
      schema B(x: text key);
      schema C(x: text key);
      channel m members R carries A, B, C;
      commitment K subject R: x object R: x {
        create on A(x);
        consequent A(x) before B(x) and C(x) or B(x) within 5 blocks;
      }
    }"""
    spec = parse_compact(text)
    cond = spec.norms[0].consequent
    # or binds loosest, then and, then before
    assert isinstance(cond, Or)
    assert isinstance(cond.left, And)
    assert isinstance(cond.left.left, Before)
    assert isinstance(cond.right, EventPattern)


def test_parenthesized_conditions_round_trip():
    text = """compact T context c {
      roles R;
      schema A(x: text key);
      schema B(x: text key);
      channel m members R carries A, B;
      commitment K subject R: x object R: x {
        create on A(x);
        consequent (A(x) or B(x)) and B(x) within 5 blocks;
      }
    }"""
    spec = parse_compact(text)
    cond = spec.norms[0].consequent
    assert isinstance(cond, And)
    assert isinstance(cond.left, Or)
    assert parse_compact(pretty_print(spec)) == spec


def test_literals_parse_with_kinds():
    text = """compact T context c {
      roles R;
      schema A(x: text key, n: int out, b: bool out);
      channel m members R carries A;
      commitment K subject R: x object R: x {
        create on A(x);
        consequent A(x, n: -3, b: true) and A(x, n: 7, b: false) within 5 blocks;
      }
    }"""
    spec = parse_compact(text)
    cond = spec.norms[0].consequent
    left, right = cond.left, cond.right
    assert left.constraints[1].term == Literal(-3)
    assert left.constraints[2].term == Literal(True)
    assert right.constraints[1].term == Literal(7)
    assert right.constraints[2].term == Literal(False)


def test_string_literal_escapes_round_trip():
    text = ('compact T context c { roles R; schema A(x: text key, s: text out); '
            'channel m members R carries A; '
            'commitment K subject R: x object R: x { create on A(x); '
            'consequent A(x, s: "a\\"b\\\\c\\n") within 2 blocks; } }')
    spec = parse_compact(text)
    assert parse_compact(pretty_print(spec)) == spec
    term = spec.norms[0].consequent.constraints[1].term
    assert term == Literal('a"b\\c\n')


def test_counts_as_fact_names_resolve_in_conditions(tumor_spec):
    antecedent = tumor_spec.norms[0].antecedent
    assert isinstance(antecedent, FactPattern)
    assert antecedent.fact == "Benign"


def test_parse_error_reports_offending_token():
    text = "compact T context c { roles R; schema A(x: text key) channel }"
    with pytest.raises(ParseError) as err:
        parse_compact(text)
    assert err.value.token == "channel"
    assert "';'" in err.value.message


@pytest.mark.parametrize("path", CORPUS)
def test_error_locality_for_injected_garbage(path):
    """An illegal token at any position yields an error at or before it."""
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    tokens = [t for t in tokenize(text) if t.kind != "EOF"]
    rng = random.Random(hash(path) & 0xFFFF)
    for token in rng.sample(tokens, min(12, len(tokens))):
        lines = text.split("\n")
        line = lines[token.line - 1]
        lines[token.line - 1] = line[: token.col - 1] + "?" + line[token.col - 1 :]
        mutated = "\n".join(lines)
        with pytest.raises(ParseError) as err:
            parse_compact(mutated)
        assert (err.value.line, err.value.col) <= (token.line, token.col), (
            f"error at {err.value.line}:{err.value.col} past injection "
            f"{token.line}:{token.col} in {path}"
        )


def test_comments_and_whitespace_are_ignored():
    spec_a = parse_compact(
        "compact T context c {  # inline comment\n"
        "  roles R;\n# full-line comment\n  schema A(x: text key);\n"
        "  channel m members R carries A;\n}"
    )
    spec_b = parse_compact(
        "compact T context c { roles R; schema A(x: text key); channel m members R carries A; }"
    )
    assert spec_a == spec_b
