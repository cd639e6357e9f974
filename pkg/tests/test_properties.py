"""Property-based checks for the pure helpers."""

from __future__ import annotations

import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cadteam.cadagent import format_feedback, strip_code_fences
from cadteam.domain import (
    TRANSITIONS,
    FeedbackItem,
    FeedbackSource,
    Phase,
    SessionEvent,
    new_session,
    transition,
)
from cadteam.docs import DocCorpus, truncate_for_context
from cadteam.errors import IllegalTransition
from cadteam.mesh import Mesh, load_stl
from cadteam.orchestrator import slugify
from cadteam.qa import parse_issues

from helpers import binary_stl_bytes


printable_text = st.text(
    alphabet=st.characters(codec="ascii", exclude_categories=("Cc",)), max_size=200
)


@given(
    interior=st.text(max_size=300).filter(lambda s: "```" not in s and s.strip()),
    language=st.sampled_from(["", "python", "py"]),
)
def test_fenced_interiors_round_trip(interior, language):
    fenced = f"```{language}\n{interior}\n```"
    assert strip_code_fences(fenced) == interior


@given(st.lists(printable_text, max_size=10))
def test_format_feedback_emits_one_line_per_item(items):
    feedback = [
        FeedbackItem(source=FeedbackSource.VALIDATION, text=t or "x", round=1) for t in items
    ]
    rendered = format_feedback(feedback)
    lines = rendered.splitlines()
    assert len(lines) == len(items)
    for index, line in enumerate(lines):
        assert line.startswith(f"{index + 1}. [validation] ")


@given(st.text(max_size=120))
def test_slugify_output_shape(text):
    slug = slugify(text)
    assert slug
    assert len(slug) <= 40
    assert all(c.islower() or c.isdigit() or c == "-" for c in slug)
    assert not slug.startswith("-") and not slug.endswith("-")


@given(st.sampled_from(list(Phase)), st.sampled_from(list(SessionEvent)))
def test_transition_is_total_over_the_table(phase, event):
    state = replace(new_session([], "a part"), phase=phase)
    if (phase, event) in TRANSITIONS:
        assert transition(state, event).phase is TRANSITIONS[(phase, event)]
    else:
        try:
            transition(state, event)
        except IllegalTransition as exc:
            assert phase.value in str(exc) and event.value in str(exc)
        else:
            raise AssertionError("transition accepted a pair outside the table")


@given(
    budget=st.integers(min_value=1, max_value=400),
    sections=st.lists(
        st.tuples(printable_text.filter(str.strip), printable_text), min_size=1, max_size=6
    ),
)
def test_truncate_for_context_respects_budget(budget, sections):
    text = "\n".join(f"# {title}\n{body}" for title, body in sections)
    corpus = DocCorpus(source_url="local", fetched_at=0.0, text=text, byte_size=len(text))
    rendered = truncate_for_context(corpus, budget, "import cadquery")
    assert len(rendered) <= budget


@given(printable_text.filter(str.strip))
def test_parse_issues_never_loses_a_nonempty_review(text):
    issues = parse_issues(text)
    assert issues
    assert all(issue.strip() for issue in issues)


coordinates = st.floats(min_value=-1000, max_value=1000, allow_nan=False, width=32)


@given(
    st.lists(
        st.tuples(*[st.tuples(coordinates, coordinates, coordinates)] * 3),
        min_size=1,
        max_size=12,
    )
)
def test_binary_stl_round_trips_vertices(triangles):
    data = binary_stl_bytes(triangles)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "part.stl"
        path.write_bytes(data)
        mesh = load_stl(path)
    assert isinstance(mesh, Mesh)
    expected = np.asarray(triangles, dtype=np.float32).reshape(-1, 3, 3)
    np.testing.assert_allclose(mesh.triangles, expected, rtol=0, atol=0)
