"""Structure extraction over realistic model-output shapes.

The fixture suite below was hand-built and eyeballed first; each entry pairs
a raw reply shape models actually produce with the value extraction must
recover.
"""

from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from jitsteer.errors import NoStructureFound, SchemaMismatch
from jitsteer.structured import NUMBER, StructureDescriptor, extract_structure

OBJ = StructureDescriptor(kind="object", required=("name",))
ARR = StructureDescriptor(kind="array")

# (raw reply, descriptor, expected value) — ten shapes seen in the wild.
FIXTURES = [
    # 1. bare object
    ('{"name": "a", "x": 1}', OBJ, {"name": "a", "x": 1}),
    # 2. chatty preamble
    ('sure, here is the JSON you asked for: {"name": "b"}', OBJ, {"name": "b"}),
    # 3. fenced code block
    ('Here you go:\n```json\n{"name": "c"}\n```\nLet me know!', OBJ, {"name": "c"}),
    # 4. fence without language tag
    ('```\n{"name": "d"}\n```', OBJ, {"name": "d"}),
    # 5. braces inside string values
    ('{"name": "uses {braces} inside"}', OBJ, {"name": "uses {braces} inside"}),
    # 6. trailing prose after the object
    ('{"name": "e"} — hope that helps!', OBJ, {"name": "e"}),
    # 7. a broken fragment before the real object
    ('{oops not json. The real one: {"name": "f"}', OBJ, {"name": "f"}),
    # 8. nested object, outermost wins
    ('{"name": "g", "inner": {"name": "h"}}', OBJ, {"name": "g", "inner": {"name": "h"}}),
    # 9. bare array with prose
    ("The list: [1, 2, 3]. Done.", ARR, [1, 2, 3]),
    # 10. bare numeric reply
    ("0.85", NUMBER, 0.85),
]


@pytest.mark.parametrize("raw,descriptor,expected", FIXTURES)
def test_extraction_fixture_suite(raw, descriptor, expected):
    assert extract_structure(raw, descriptor) == expected


def test_numeric_reply_with_label_falls_back_to_first_float():
    assert extract_structure("Score: 0.7", NUMBER) == 0.7


def test_numeric_reply_without_number_raises():
    with pytest.raises(NoStructureFound):
        extract_structure("no score here", NUMBER)


def test_no_structure_in_prose():
    with pytest.raises(NoStructureFound):
        extract_structure("just words, no json at all", OBJ)


def test_schema_mismatch_lists_missing_fields():
    with pytest.raises(SchemaMismatch) as exc_info:
        extract_structure('{"other": 1}', OBJ)
    assert exc_info.value.missing == ["name"]


def test_schema_mismatch_lists_extra_fields_when_closed():
    closed = StructureDescriptor(kind="object", required=("name",), allow_extra=False)
    with pytest.raises(SchemaMismatch) as exc_info:
        extract_structure('{"name": "x", "rogue": 1}', closed)
    assert exc_info.value.extra == ["rogue"]


def test_array_item_requirements():
    descriptor = StructureDescriptor(kind="array", item_required=("name",))
    assert extract_structure('[{"name": "a"}]', descriptor) == [{"name": "a"}]
    with pytest.raises(SchemaMismatch):
        extract_structure('[{"name": "a"}, {"nope": 1}]', descriptor)


def test_unclosed_object_then_valid_one():
    raw = '{"name": "start... {"name": "real"}'
    # The first candidate never balances cleanly into valid JSON; the scan
    # must move on and find the embedded one.
    value = extract_structure(raw, OBJ)
    assert value == {"name": "real"}


@given(st.recursive(
    st.one_of(st.integers(), st.text(max_size=20), st.booleans(), st.none()),
    lambda children: st.dictionaries(st.text(min_size=1, max_size=8), children, max_size=4),
    max_leaves=10,
).filter(lambda v: isinstance(v, dict)))
def test_extraction_idempotent_on_objects(value):
    descriptor = StructureDescriptor(kind="object")
    extracted = extract_structure(json.dumps(value), descriptor)
    assert extracted == value
    again = extract_structure(json.dumps(extracted), descriptor)
    assert again == extracted


@given(st.floats(allow_nan=False, allow_infinity=False, width=32))
def test_extraction_idempotent_on_numbers(value):
    extracted = extract_structure(repr(value), NUMBER)
    again = extract_structure(repr(extracted), NUMBER)
    assert again == extracted
