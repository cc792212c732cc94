"""Template engine: parsing, serialization, validation, rendering."""

from __future__ import annotations

import random

import pytest

from helpers import (
    random_schema_and_selection,
    random_template,
    resolved_values,
    scan_positions,
)
from promptware.templates import (
    Choice,
    OptionSchema,
    ResolvedPrompt,
    Segment,
    SegmentKind,
    Selection,
    SlotKind,
    SlotSpec,
    Template,
    TemplateParseError,
    ValidationReport,
    cross_check,
    effective_slots,
    parse_template,
    render,
    serialize,
    validate_selection,
)


def lit(text: str) -> Segment:
    return Segment.literal(text)


def slot(name: str) -> Segment:
    return Segment.slot(name)


def simple_schema(template: Template, **free_text_defaults: str) -> OptionSchema:
    """Free-text spec for every slot in the template."""
    return OptionSchema(
        template.id,
        tuple(SlotSpec(name, name, SlotKind.FREE_TEXT) for name in template.slot_names()),
    )


class TestParse:
    def test_slots_and_literals(self):
        t = parse_template("Give {{valence}} feedback: {{input}}")
        assert [s.kind for s in t.segments] == [
            SegmentKind.LITERAL,
            SegmentKind.SLOT,
            SegmentKind.LITERAL,
            SegmentKind.SLOT,
        ]
        assert t.segments[0].text == "Give "
        assert t.segments[1].slot_name == "valence"
        assert t.segments[2].text == " feedback: "
        assert t.segments[3].slot_name == "input"

    def test_empty_source(self):
        assert parse_template("").segments == ()

    def test_bad_slot_name_offset(self):
        with pytest.raises(TemplateParseError) as exc:
            parse_template("Bad {{Valence}}")
        assert exc.value.code == "E_BAD_SLOT_NAME"
        assert exc.value.offset == 4
        assert exc.value.line == 1

    def test_unclosed_slot(self):
        with pytest.raises(TemplateParseError) as exc:
            parse_template("text {{never")
        assert exc.value.code == "E_UNCLOSED_SLOT"
        assert exc.value.offset == 5

    def test_empty_slot(self):
        with pytest.raises(TemplateParseError) as exc:
            parse_template("a{{}}b")
        assert exc.value.code == "E_EMPTY_SLOT"
        assert exc.value.offset == 1

    def test_offsets_are_bytes_and_positions_track_lines(self):
        with pytest.raises(TemplateParseError) as exc:
            parse_template("éé\n{{Bad}}")
        # two 2-byte chars plus the newline precede the slot marker
        assert exc.value.offset == 5
        assert exc.value.line == 2
        assert exc.value.column == 1

    def test_escaped_brace_pair_is_literal(self):
        t = parse_template(r"keep \{{ as text")
        assert t.segments == (lit("keep {{ as text"),)

    def test_escaped_backslash(self):
        t = parse_template(r"a \\ b")
        assert t.segments == (lit("a \\ b"),)

    def test_lone_backslash_kept(self):
        assert parse_template(r"C:\temp").segments == (lit(r"C:\temp"),)

    def test_literals_are_maximally_merged(self):
        t = parse_template(r"a\{{b{{x}}c")
        kinds = [s.kind for s in t.segments]
        assert kinds == [SegmentKind.LITERAL, SegmentKind.SLOT, SegmentKind.LITERAL]
        assert t.segments[0].text == "a{{b"

    def test_multi_occurrence_slot(self):
        t = parse_template("{{x}} and {{x}}")
        assert list(t.slots()) == ["x", "x"]
        assert t.slot_names() == ("x",)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            parse_template("x" * ((1 << 20) + 1))


class TestSerialize:
    def test_simple(self):
        t = Template(id="t", name="", version=1, segments=(lit("Hi "), slot("who")))
        assert serialize(t) == "Hi {{who}}"

    def test_empty(self):
        t = Template(id="t", name="", version=1, segments=())
        assert serialize(t) == ""

    def test_literal_with_marker_is_escaped(self):
        t = Template(id="t", name="", version=1, segments=(lit("a{{b"),))
        assert serialize(t) == r"a\{{b"

    def test_brace_before_slot_is_escaped(self):
        t = Template(id="t", name="", version=1, segments=(lit("x{"), slot("a")))
        source = serialize(t)
        assert parse_template(source, template_id="t") == t

    @pytest.mark.parametrize("text", ["{{", "{{{", "\\", "\\{", "{ {", "a{", "{"])
    def test_awkward_literals_roundtrip(self, text):
        t = Template(id="t", name="", version=1, segments=(lit(text), slot("s"), lit(text)))
        assert parse_template(serialize(t), template_id="t") == t

    def test_structural_roundtrip_random(self):
        rng = random.Random(7)
        for i in range(300):
            t = random_template(rng, template_id=f"t{i}")
            assert parse_template(serialize(t), template_id=t.id, name=t.name, version=t.version) == t

    def test_source_roundtrip_on_canonical_sources(self):
        rng = random.Random(8)
        for i in range(300):
            source = serialize(random_template(rng, template_id=f"t{i}"))
            assert serialize(parse_template(source)) == source


class TestInvariants:
    def test_adjacent_literals_rejected(self):
        with pytest.raises(ValueError):
            Template(id="t", name="", version=1, segments=(lit("a"), lit("b")))

    def test_slot_segment_rejects_text(self):
        with pytest.raises(ValueError):
            Segment(SegmentKind.SLOT, text="x", slot_name="a")

    def test_bad_slot_name_rejected(self):
        with pytest.raises(ValueError):
            Segment.slot("Nope")

    def test_single_choice_needs_choices(self):
        with pytest.raises(ValueError):
            SlotSpec("a", "A", SlotKind.SINGLE_CHOICE)

    def test_default_must_be_a_choice(self):
        with pytest.raises(ValueError):
            SlotSpec("a", "A", SlotKind.SINGLE_CHOICE, (Choice("x", "X"),), default="y")

    def test_free_text_rejects_choices_and_default(self):
        with pytest.raises(ValueError):
            SlotSpec("a", "A", SlotKind.FREE_TEXT, (Choice("x", "X"),))
        with pytest.raises(ValueError):
            SlotSpec("a", "A", SlotKind.FREE_TEXT, default="x")

    def test_duplicate_slot_names_rejected(self):
        spec = SlotSpec("a", "A", SlotKind.FREE_TEXT)
        with pytest.raises(ValueError):
            OptionSchema("t", (spec, spec))

    def test_selection_key_syntax(self):
        with pytest.raises(ValueError):
            Selection({"Bad Key": "x"})
        with pytest.raises(ValueError):
            Selection({"ok": 3})  # type: ignore[dict-item]

    def test_cross_check_reports_problems(self):
        t = parse_template("{{a}} {{input}}", template_id="t")
        orphan = OptionSchema(
            "t",
            (
                SlotSpec("a", "A", SlotKind.FREE_TEXT),
                SlotSpec("ghost", "G", SlotKind.FREE_TEXT),
            ),
        )
        problems = cross_check(t, orphan)
        assert any("ghost" in p for p in problems)
        missing = OptionSchema("t", ())
        assert any("'a'" in p for p in cross_check(t, missing))

    def test_effective_slots_adds_implicit_input(self):
        t = parse_template("{{a}} {{input}}", template_id="t")
        schema = OptionSchema("t", (SlotSpec("a", "A", SlotKind.FREE_TEXT),))
        names = [s.name for s in effective_slots(t, schema)]
        assert names == ["a", "input"]


class TestValidate:
    def test_complete_bindings_pass(self, feedback_pack):
        template, schema, _ = feedback_pack
        sel = Selection(
            {
                "valence": "positive",
                "abstraction": "specific",
                "feedback_type": "content",
                "genre": "email",
                "input": "Dear team, ...",
            }
        )
        assert validate_selection(schema, template, sel).ok

    def test_missing_slot_reported(self, feedback_pack):
        template, schema, _ = feedback_pack
        sel = Selection(
            {
                "abstraction": "specific",
                "feedback_type": "content",
                "genre": "email",
                "input": "x",
            }
        )
        report = validate_selection(schema, template, sel)
        assert report.codes() == ["E_MISSING_SLOT"]
        assert report.items[0].slot == "valence"

    def test_illegal_value_reported(self, feedback_pack):
        template, schema, _ = feedback_pack
        sel = Selection(
            {
                "valence": "sarcastic",
                "abstraction": "specific",
                "feedback_type": "content",
                "genre": "email",
                "input": "x",
            }
        )
        report = validate_selection(schema, template, sel)
        assert report.codes() == ["E_ILLEGAL_VALUE"]
        assert report.items[0].value == "sarcastic"

    def test_unknown_slot_reported(self, feedback_pack):
        template, schema, _ = feedback_pack
        sel = Selection(
            {
                "valence": "positive",
                "abstraction": "specific",
                "feedback_type": "content",
                "genre": "email",
                "input": "x",
                "bogus": "y",
            }
        )
        report = validate_selection(schema, template, sel)
        assert report.codes() == ["E_UNKNOWN_SLOT"]

    def test_all_violations_reported_together(self, feedback_pack):
        template, schema, _ = feedback_pack
        sel = Selection({"valence": "sarcastic", "bogus": "y", "input": "x"})
        report = validate_selection(schema, template, sel)
        codes = report.codes()
        # all three classes at once, nothing short-circuits; genre has a
        # default so only abstraction and feedback_type are missing
        assert codes.count("E_MISSING_SLOT") == 2
        assert "E_ILLEGAL_VALUE" in codes
        assert "E_UNKNOWN_SLOT" in codes

    def test_default_fills_missing_binding(self, feedback_pack):
        template, schema, _ = feedback_pack
        sel = Selection(
            {
                "valence": "positive",
                "abstraction": "specific",
                "feedback_type": "content",
                "input": "x",
            }
        )
        assert validate_selection(schema, template, sel).ok  # genre defaults to essay

    def test_mismatched_schema_is_a_precondition_error(self, feedback_pack):
        template, _, _ = feedback_pack
        other = OptionSchema("different", ())
        with pytest.raises(ValueError):
            validate_selection(other, template, Selection({}))


class TestRender:
    def test_direct_substitution(self):
        t = parse_template(
            "Give {{valence}} feedback on the {{aspect}} of this {{genre}}: {{input}}",
            template_id="t",
        )
        schema = simple_schema(t)
        sel = Selection(
            {
                "valence": "positive",
                "aspect": "structure",
                "genre": "email",
                "input": "Dear team, ...",
            }
        )
        result = render(t, schema, sel)
        assert isinstance(result, ResolvedPrompt)
        assert result.text == "Give positive feedback on the structure of this email: Dear team, ..."
        assert result.provenance.mode == "template"
        assert result.provenance.source_id == "t"

    def test_no_slots_is_identity(self):
        t = parse_template("just text, no slots", template_id="t")
        result = render(t, OptionSchema("t", ()), Selection({}))
        assert isinstance(result, ResolvedPrompt)
        assert result.text == "just text, no slots"

    def test_returns_report_when_invalid(self, feedback_pack):
        template, schema, _ = feedback_pack
        result = render(template, schema, Selection({}))
        assert isinstance(result, ValidationReport)
        assert not result.ok

    def test_multi_occurrence_gets_same_value(self):
        t = parse_template("{{x}}-{{x}}-{{x}}", template_id="t")
        result = render(t, simple_schema(t), Selection({"x": "ab"}))
        assert isinstance(result, ResolvedPrompt)
        assert result.text == "ab-ab-ab"

    def test_values_injected_verbatim(self):
        t = parse_template("[{{v}}]", template_id="t")
        value = "  {{spaces}} and \\ braces\n"
        result = render(t, simple_schema(t), Selection({"v": value}))
        assert isinstance(result, ResolvedPrompt)
        assert result.text == f"[{value}]"

    def test_render_fidelity_against_scan_oracle(self):
        rng = random.Random(99)
        for i in range(300):
            template = random_template(rng, template_id=f"t{i}")
            schema, selection = random_schema_and_selection(rng, template)
            result = render(template, schema, selection)
            assert isinstance(result, ResolvedPrompt), result
            values = resolved_values(template, schema, selection)
            slot_hits, literal_hits, total = scan_positions(template, values)
            assert len(result.text) == total
            for name, pos, value in slot_hits:
                assert result.text[pos : pos + len(value)] == value, (name, pos)
            for pos, text in literal_hits:
                assert result.text[pos : pos + len(text)] == text

    def test_no_marker_leakage_with_brace_free_inputs(self):
        from helpers import PLAIN_CHARS

        rng = random.Random(100)
        for i in range(200):
            template = random_template(rng, template_id=f"t{i}", chars=PLAIN_CHARS)
            schema, selection = random_schema_and_selection(rng, template, chars=PLAIN_CHARS)
            result = render(template, schema, selection)
            assert isinstance(result, ResolvedPrompt)
            assert "{{" not in result.text

    def test_marker_in_output_traces_to_a_source_brace(self):
        rng = random.Random(103)
        for i in range(200):
            template = random_template(rng, template_id=f"t{i}")
            schema, selection = random_schema_and_selection(rng, template)
            result = render(template, schema, selection)
            assert isinstance(result, ResolvedPrompt)
            if "{{" in result.text:
                values = resolved_values(template, schema, selection)
                literals = [s.text for s in template.segments if s.kind is SegmentKind.LITERAL]
                assert any("{" in text for text in literals) or any(
                    "{" in v for v in values.values()
                )

    def test_render_is_deterministic(self):
        rng = random.Random(101)
        template = random_template(rng, template_id="t")
        schema, selection = random_schema_and_selection(rng, template)
        first = render(template, schema, selection)
        second = render(template, schema, selection)
        assert isinstance(first, ResolvedPrompt) and isinstance(second, ResolvedPrompt)
        assert first.text == second.text

    def test_render_succeeds_iff_validation_passes(self):
        rng = random.Random(102)
        for i in range(200):
            template = random_template(rng, template_id=f"t{i}")
            schema, selection = random_schema_and_selection(rng, template)
            if rng.random() < 0.5 and template.slot_names():
                # break the selection on purpose
                bindings = dict(selection.bindings)
                bindings.pop(next(iter(template.slot_names())), None)
                bindings["unknown_extra"] = "x"
                selection = Selection(bindings)
            report = validate_selection(schema, template, selection)
            result = render(template, schema, selection)
            assert isinstance(result, ResolvedPrompt) == report.ok
