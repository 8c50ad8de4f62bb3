import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sidkit.normalize import (
    APOSTROPHES,
    normalize_text,
    normalize_token,
    replay_trace,
    trace_token,
)

RULE_FIXTURES = {
    "soL": "sol",
    "vat'n": "vatn",
    "bakkst": "bakst",
    "fossjk": "forsk",
    "hassjt": "harst",
    "issjn": "issjn",
    "kattne": "katne",
}


@pytest.mark.parametrize("source,expected", sorted(RULE_FIXTURES.items()))
def test_rule_fixtures(source, expected):
    assert normalize_token(source) == expected


def test_thick_l_only_uppercase():
    assert normalize_token("soL") == "sol"
    assert normalize_token("sol") == "sol"
    assert normalize_token("LoLa") == "lola"


def test_all_apostrophe_variants_removed():
    for apostrophe in APOSTROPHES:
        assert apostrophe not in normalize_token(f"vat{apostrophe}n")


def test_cluster_rules_case_insensitive_with_case_kept():
    assert normalize_token("HASSJT") == "HARST"
    assert normalize_token("Bakkst") == "Bakst"
    assert normalize_token("FOSSJK") == "FORSK"
    assert normalize_token("KATTNE") == "KATNE"


def test_kkj_protected():
    assert normalize_token("ikkje") == "ikkje"


def test_stacked_clusters_reduce_to_fixpoint():
    assert normalize_token("kannnde") == "kande"
    assert normalize_token("fjellldal") == "fjeldal"


def test_cluster_requires_following_consonant():
    assert normalize_token("katt") == "katt"  # word-final double consonant kept
    assert normalize_token("kattea") == "kattea"  # vowel follows, kept


def test_hyphen_is_not_a_consonant():
    assert normalize_token("katt-ne") == "katt-ne"


def test_vowels_never_rewritten():
    assert normalize_token("haaard") == "haaard"


def test_rewrite_created_cluster_is_reduced():
    # ssjt -> rst can abut a preceding r; the fixpoint pass must clean it up.
    assert normalize_token("arssjt") == "arst"


def test_normalize_text_preserves_whitespace():
    assert normalize_text("") == ""
    assert normalize_text("vat'n  soL\n") == "vatn  sol\n"
    assert normalize_text("a\tb\nc") == "a\tb\nc"


def test_traces_replay_to_output():
    for source in list(RULE_FIXTURES) + ["L'aLLkst", "vass'n", "arssjt"]:
        trace = trace_token(source)
        assert replay_trace(trace) == trace.output
        assert trace.input == source


def test_trace_json_shape():
    trace = trace_token("vat'n")
    assert '"apostrophe"' in trace.to_json()


NORWEGIAN = "abcdefghijklmnopqrstuvwxyzæøåABCDEFGHIJKLMNOPQRSTUVWXYZÆØÅ'"


def test_idempotent_on_random_strings():
    rng = random.Random(1234)
    for _ in range(2000):
        s = "".join(rng.choice(NORWEGIAN) for _ in range(rng.randint(0, 12)))
        once = normalize_token(s)
        assert normalize_token(once) == once, s


@given(st.text(alphabet=NORWEGIAN, max_size=20))
def test_idempotence_property(s):
    once = normalize_token(s)
    assert normalize_token(once) == once


@given(st.text(alphabet=NORWEGIAN, max_size=20))
def test_output_free_of_apostrophes_and_thick_l(s):
    out = normalize_token(s)
    assert "L" not in out
    assert not (set(out) & APOSTROPHES)


@given(st.text(alphabet=NORWEGIAN + " \t\n", max_size=40))
def test_text_level_idempotence(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


@given(st.text(alphabet=NORWEGIAN, max_size=20))
def test_cluster_rule_reaches_a_true_fixpoint(s):
    from sidkit.normalize import _rule3_step

    assert _rule3_step(normalize_token(s)) is None
