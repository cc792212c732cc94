"""Slot-based prompt templates: parsing, serialization, validation, rendering.

A template is plain text with ``{{name}}`` slots. A backslash escapes the
character after it where that matters: ``\\{`` is a literal brace (so
``\\{{`` yields a literal brace pair instead of opening a slot) and ``\\\\``
is a literal backslash. Anywhere else a backslash is just a backslash.
Rendering substitutes bound values verbatim; nothing is trimmed, escaped,
or re-encoded on the way to the model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Mapping

SLOT_NAME_RE = re.compile(r"[a-z][a-z0-9_]*")

#: Slot implicitly present in every schema; carries the user's main text.
RESERVED_INPUT_SLOT = "input"

#: Cap on template sources and free-text values (1 MiB).
MAX_TEXT_BYTES = 1 << 20

E_UNCLOSED_SLOT = "E_UNCLOSED_SLOT"
E_BAD_SLOT_NAME = "E_BAD_SLOT_NAME"
E_EMPTY_SLOT = "E_EMPTY_SLOT"

E_MISSING_SLOT = "E_MISSING_SLOT"
E_UNKNOWN_SLOT = "E_UNKNOWN_SLOT"
E_ILLEGAL_VALUE = "E_ILLEGAL_VALUE"

MODE_STATIC = "static"
MODE_TEMPLATE = "template"
MODE_FREEFORM = "freeform"


class TemplateParseError(Exception):
    """Template source rejected; carries position as byte offset and line/column."""

    def __init__(self, code: str, message: str, offset: int, line: int, column: int):
        super().__init__(f"{code} at offset {offset} (line {line}, column {column}): {message}")
        self.code = code
        self.message = message
        self.offset = offset
        self.line = line
        self.column = column


class SegmentKind(Enum):
    LITERAL = "literal"
    SLOT = "slot"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    text: str = ""
    slot_name: str = ""

    def __post_init__(self) -> None:
        if self.kind is SegmentKind.LITERAL:
            if self.slot_name:
                raise ValueError("literal segments carry no slot name")
            if not self.text:
                raise ValueError("literal segments must contain text")
        else:
            if self.text:
                raise ValueError("slot segments carry no text payload")
            if not SLOT_NAME_RE.fullmatch(self.slot_name):
                raise ValueError(f"invalid slot name: {self.slot_name!r}")

    @classmethod
    def literal(cls, text: str) -> "Segment":
        return cls(SegmentKind.LITERAL, text=text)

    @classmethod
    def slot(cls, name: str) -> "Segment":
        return cls(SegmentKind.SLOT, slot_name=name)


@dataclass(frozen=True)
class Template:
    """A parsed template: ordered literal and slot segments."""

    id: str
    name: str
    version: int
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.id:
            raise ValueError("template id must be nonempty")
        if not isinstance(self.version, int) or self.version < 1:
            raise ValueError("template version must be an integer >= 1")
        previous_was_literal = False
        for seg in self.segments:
            if seg.kind is SegmentKind.LITERAL:
                if previous_was_literal:
                    raise ValueError("adjacent literal segments must be merged")
                previous_was_literal = True
            else:
                previous_was_literal = False

    def slot_names(self) -> tuple[str, ...]:
        """Distinct slot names in first-occurrence order."""
        seen: dict[str, None] = {}
        for seg in self.segments:
            if seg.kind is SegmentKind.SLOT:
                seen.setdefault(seg.slot_name)
        return tuple(seen)

    def slots(self) -> Iterator[str]:
        """Every slot occurrence, in order, with repeats."""
        for seg in self.segments:
            if seg.kind is SegmentKind.SLOT:
                yield seg.slot_name


class SlotKind(Enum):
    SINGLE_CHOICE = "single_choice"
    FREE_TEXT = "free_text"


@dataclass(frozen=True)
class Choice:
    value: str
    label: str


@dataclass(frozen=True)
class SlotSpec:
    """UI contract for one slot: what a client may offer and what counts as valid."""

    name: str
    label: str
    kind: SlotKind
    choices: tuple[Choice, ...] = ()
    default: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "choices", tuple(self.choices))
        if not SLOT_NAME_RE.fullmatch(self.name):
            raise ValueError(f"invalid slot name: {self.name!r}")
        if self.kind is SlotKind.SINGLE_CHOICE:
            if not self.choices:
                raise ValueError(f"single-choice slot {self.name!r} needs at least one choice")
            values = [c.value for c in self.choices]
            if len(set(values)) != len(values):
                raise ValueError(f"slot {self.name!r} has duplicate choice values")
            if self.default is not None and self.default not in values:
                raise ValueError(f"default {self.default!r} is not a choice of slot {self.name!r}")
        else:
            if self.choices:
                raise ValueError(f"free-text slot {self.name!r} cannot declare choices")
            if self.default is not None:
                raise ValueError(f"free-text slot {self.name!r} cannot declare a default")

    def choice_values(self) -> tuple[str, ...]:
        return tuple(c.value for c in self.choices)


@dataclass(frozen=True)
class OptionSchema:
    """Slot declarations for one template; the contract a UI renders from."""

    template_id: str
    slots: tuple[SlotSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "slots", tuple(self.slots))
        if not self.template_id:
            raise ValueError("schema must reference a template id")
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            raise ValueError("slot names must be unique within a schema")

    def slot(self, name: str) -> SlotSpec | None:
        for spec in self.slots:
            if spec.name == name:
                return spec
        return None

    def single_choice_slots(self) -> tuple[SlotSpec, ...]:
        return tuple(s for s in self.slots if s.kind is SlotKind.SINGLE_CHOICE)


@dataclass(frozen=True)
class Selection:
    """A user's chosen value per slot (slot name -> value string)."""

    bindings: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bindings", dict(self.bindings))
        for key, value in self.bindings.items():
            if not isinstance(key, str) or not SLOT_NAME_RE.fullmatch(key):
                raise ValueError(f"invalid slot name in selection: {key!r}")
            if not isinstance(value, str):
                raise ValueError(f"binding for {key!r} must be a string")


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    slot: str
    message: str
    value: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    """All violations found for one (schema, template, selection) triple."""

    items: tuple[ValidationIssue, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def ok(self) -> bool:
        return not self.items

    def codes(self) -> list[str]:
        return [item.code for item in self.items]


@dataclass(frozen=True)
class Provenance:
    """Where a resolved prompt came from: mode plus source ids."""

    mode: str
    source_id: str | None = None
    version: int | None = None


@dataclass(frozen=True)
class ResolvedPrompt:
    """The exact text to send to a provider, plus its provenance."""

    text: str
    provenance: Provenance


def _position_error(code: str, message: str, source: str, index: int) -> TemplateParseError:
    offset = len(source[:index].encode("utf-8"))
    line = source.count("\n", 0, index) + 1
    column = index - source.rfind("\n", 0, index)
    return TemplateParseError(code, message, offset, line, column)


def parse_template(
    source: str,
    *,
    template_id: str = "adhoc",
    name: str = "",
    version: int = 1,
) -> Template:
    """Parse template source into a Template.

    Raises TemplateParseError on bad slot syntax and ValueError when the
    source exceeds the 1 MiB cap.
    """
    if len(source.encode("utf-8")) > MAX_TEXT_BYTES:
        raise ValueError("template source exceeds 1 MiB")

    segments: list[Segment] = []
    buffer: list[str] = []
    i = 0
    n = len(source)

    def flush() -> None:
        if buffer:
            segments.append(Segment.literal("".join(buffer)))
            buffer.clear()

    while i < n:
        ch = source[i]
        if ch == "\\":
            nxt = source[i + 1] if i + 1 < n else ""
            if nxt == "\\":
                buffer.append("\\")
                i += 2
            elif nxt == "{":
                buffer.append("{")
                i += 2
            else:
                buffer.append("\\")
                i += 1
        elif ch == "{" and source.startswith("{{", i):
            end = source.find("}}", i + 2)
            if end < 0:
                raise _position_error(E_UNCLOSED_SLOT, "slot is never closed with '}}'", source, i)
            slot_name = source[i + 2 : end]
            if not slot_name:
                raise _position_error(E_EMPTY_SLOT, "slot has no name", source, i)
            if not SLOT_NAME_RE.fullmatch(slot_name):
                raise _position_error(
                    E_BAD_SLOT_NAME,
                    f"slot name {slot_name!r} must match [a-z][a-z0-9_]*",
                    source,
                    i,
                )
            flush()
            segments.append(Segment.slot(slot_name))
            i = end + 2
        else:
            buffer.append(ch)
            i += 1
    flush()
    return Template(id=template_id, name=name, version=version, segments=tuple(segments))


def _escape_literal(text: str, next_starts_with_brace: bool) -> str:
    out: list[str] = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch == "\\":
            out.append("\\\\")
        elif ch == "{":
            followed_by_brace = text[i + 1] == "{" if i + 1 < n else next_starts_with_brace
            out.append("\\{" if followed_by_brace else "{")
        else:
            out.append(ch)
    return "".join(out)


def serialize(template: Template) -> str:
    """Render a Template back to source text; inverse of parse_template."""
    parts: list[str] = []
    segments = template.segments
    for i, seg in enumerate(segments):
        if seg.kind is SegmentKind.LITERAL:
            next_is_slot = i + 1 < len(segments) and segments[i + 1].kind is SegmentKind.SLOT
            parts.append(_escape_literal(seg.text, next_is_slot))
        else:
            parts.append("{{" + seg.slot_name + "}}")
    return "".join(parts)


def validate_selection(
    schema: OptionSchema, template: Template, selection: Selection
) -> ValidationReport:
    """Check a selection against a template and its schema.

    Reports every violation rather than stopping at the first: slots with
    neither binding nor default, single-choice bindings outside their choice
    set, and bindings naming slots the template never uses.
    """
    if schema.template_id != template.id:
        raise ValueError(
            f"schema targets template {schema.template_id!r}, got template {template.id!r}"
        )
    items: list[ValidationIssue] = []
    template_slots = template.slot_names()

    for slot_name in template_slots:
        if slot_name in selection.bindings:
            continue
        spec = schema.slot(slot_name)
        if spec is not None and spec.default is not None:
            continue
        items.append(
            ValidationIssue(
                E_MISSING_SLOT, slot_name, f"slot {slot_name!r} has no binding and no default"
            )
        )

    for slot_name in template_slots:
        spec = schema.slot(slot_name)
        if spec is None or spec.kind is not SlotKind.SINGLE_CHOICE:
            continue
        if slot_name not in selection.bindings:
            continue
        value = selection.bindings[slot_name]
        if value not in spec.choice_values():
            items.append(
                ValidationIssue(
                    E_ILLEGAL_VALUE,
                    slot_name,
                    f"{value!r} is not one of {list(spec.choice_values())}",
                    value=value,
                )
            )

    known = set(template_slots)
    for slot_name in sorted(selection.bindings):
        if slot_name not in known:
            items.append(
                ValidationIssue(
                    E_UNKNOWN_SLOT,
                    slot_name,
                    f"slot {slot_name!r} does not appear in template {template.id!r}",
                )
            )

    return ValidationReport(tuple(items))


def render(
    template: Template, schema: OptionSchema, selection: Selection
) -> ResolvedPrompt | ValidationReport:
    """Substitute bound values into the template, byte-exact.

    Returns the nonempty ValidationReport instead of a prompt when the
    selection does not validate. Schema defaults fill unbound slots.
    """
    report = validate_selection(schema, template, selection)
    if not report.ok:
        return report

    defaults = {s.name: s.default for s in schema.slots if s.default is not None}
    parts: list[str] = []
    for seg in template.segments:
        if seg.kind is SegmentKind.LITERAL:
            parts.append(seg.text)
        elif seg.slot_name in selection.bindings:
            parts.append(selection.bindings[seg.slot_name])
        else:
            parts.append(defaults[seg.slot_name])
    return ResolvedPrompt(
        text="".join(parts),
        provenance=Provenance(MODE_TEMPLATE, source_id=template.id, version=template.version),
    )


def cross_check(template: Template, schema: OptionSchema) -> list[str]:
    """Template/schema cross-reference problems, as human-readable messages.

    Clean when: the schema targets this template, every non-reserved template
    slot has a spec, every spec is used by the template, and an explicit
    ``input`` spec is free-text.
    """
    problems: list[str] = []
    if schema.template_id != template.id:
        problems.append(
            f"schema targets template {schema.template_id!r} but template id is {template.id!r}"
        )
    template_slots = set(template.slot_names())
    declared = {s.name for s in schema.slots}
    for slot_name in template.slot_names():
        if slot_name == RESERVED_INPUT_SLOT:
            continue
        if slot_name not in declared:
            problems.append(f"template references undeclared slot {slot_name!r}")
    for spec in schema.slots:
        if spec.name not in template_slots:
            problems.append(f"slot spec {spec.name!r} is never referenced by the template")
        if spec.name == RESERVED_INPUT_SLOT and spec.kind is not SlotKind.FREE_TEXT:
            problems.append("the reserved 'input' slot must be free-text")
    return problems


def effective_slots(template: Template, schema: OptionSchema) -> tuple[SlotSpec, ...]:
    """Declared slot specs plus the implicit ``input`` spec when the template
    uses it without declaring it. This is the full list a UI must render."""
    specs = list(schema.slots)
    declared = {s.name for s in specs}
    if RESERVED_INPUT_SLOT in template.slot_names() and RESERVED_INPUT_SLOT not in declared:
        specs.append(SlotSpec(RESERVED_INPUT_SLOT, "Input", SlotKind.FREE_TEXT))
    return tuple(specs)
