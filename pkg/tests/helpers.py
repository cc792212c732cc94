"""Shared test machinery: random generators, the position-scan oracle, and
scripted transports for hermetic gateway testing."""

from __future__ import annotations

import json
import random
import threading

from promptware.gateway import TransportReply, TransportRequest
from promptware.templates import (
    Choice,
    OptionSchema,
    Segment,
    SegmentKind,
    Selection,
    SlotKind,
    SlotSpec,
    Template,
)

# Literal pool deliberately includes braces, backslashes, newlines, and
# multibyte characters to stress escaping and byte-exactness.
LITERAL_CHARS = "abcdefgh XYZ0129_.,:;!?\n\t{}\\-éß日本語🙂"

# Same spread without braces or backslashes, for leak-freedom checks.
PLAIN_CHARS = "abcdefgh XYZ0129_.,:;!?\n\t-éß日本語🙂"

SLOT_POOL = ("alpha", "beta", "gamma", "delta", "tone", "detail", "input", "x1", "weird_slot")


def random_text(
    rng: random.Random, min_len: int = 1, max_len: int = 18, chars: str = LITERAL_CHARS
) -> str:
    length = rng.randint(min_len, max_len)
    return "".join(rng.choice(chars) for _ in range(length))


def random_template(
    rng: random.Random, template_id: str = "gen", chars: str = LITERAL_CHARS
) -> Template:
    segments: list[Segment] = []
    previous_literal = False
    for _ in range(rng.randint(0, 8)):
        if previous_literal or rng.random() < 0.45:
            segments.append(Segment.slot(rng.choice(SLOT_POOL)))
            previous_literal = False
        else:
            segments.append(Segment.literal(random_text(rng, chars=chars)))
            previous_literal = True
    return Template(
        id=template_id, name="generated", version=rng.randint(1, 9), segments=tuple(segments)
    )


def random_schema_and_selection(
    rng: random.Random, template: Template, chars: str = LITERAL_CHARS
) -> tuple[OptionSchema, Selection]:
    """A schema covering every template slot plus a selection that validates.

    Some single-choice slots get defaults and are sometimes left unbound to
    exercise default filling; values draw from ``chars`` plus a unique tag.
    """
    slots: list[SlotSpec] = []
    bindings: dict[str, str] = {}
    for name in template.slot_names():
        if name == "input" or rng.random() < 0.3:
            slots.append(SlotSpec(name, name.title(), SlotKind.FREE_TEXT))
            bindings[name] = random_text(rng, 0, 30, chars=chars)
        else:
            values = [
                f"v{rng.randrange(10_000)}_{i}" + random_text(rng, 0, 3, chars=chars)
                for i in range(rng.randint(1, 4))
            ]
            default = rng.choice(values) if rng.random() < 0.4 else None
            slots.append(
                SlotSpec(
                    name,
                    name.title(),
                    SlotKind.SINGLE_CHOICE,
                    choices=tuple(Choice(v, v.upper()) for v in values),
                    default=default,
                )
            )
            if default is None or rng.random() < 0.7:
                bindings[name] = rng.choice(values)
    return OptionSchema(template.id, tuple(slots)), Selection(bindings)


def resolved_values(template: Template, schema: OptionSchema, selection: Selection) -> dict[str, str]:
    values = {}
    for name in template.slot_names():
        if name in selection.bindings:
            values[name] = selection.bindings[name]
        else:
            spec = schema.slot(name)
            assert spec is not None and spec.default is not None
            values[name] = spec.default
    return values


def scan_positions(
    template: Template, values: dict[str, str]
) -> tuple[list[tuple[str, int, str]], list[tuple[int, str]], int]:
    """Independent prefix-sum oracle: where every slot value and literal must
    land in the rendered output, plus the total output length."""
    slot_hits: list[tuple[str, int, str]] = []
    literal_hits: list[tuple[int, str]] = []
    position = 0
    for seg in template.segments:
        if seg.kind is SegmentKind.LITERAL:
            literal_hits.append((position, seg.text))
            position += len(seg.text)
        else:
            value = values[seg.slot_name]
            slot_hits.append((seg.slot_name, position, value))
            position += len(value)
    return slot_hits, literal_hits, position


def completion_reply(text: str) -> TransportReply:
    body = json.dumps({"choices": [{"message": {"role": "assistant", "content": text}}]})
    return TransportReply(200, body.encode("utf-8"))


class ScriptedTransport:
    """Plays back a fixed outcome sequence and records every request.

    Steps: an int HTTP status (empty JSON body), ("ok", text) for a
    well-formed completion, ("stall", seconds) to hang, a TransportReply,
    or an exception instance to raise.
    """

    def __init__(self, steps):
        self.steps = list(steps)
        self.requests: list[TransportRequest] = []

    def send(self, request: TransportRequest) -> TransportReply:
        self.requests.append(request)
        if not self.steps:
            raise AssertionError("transport script exhausted")
        step = self.steps.pop(0)
        if isinstance(step, BaseException):
            raise step
        if isinstance(step, TransportReply):
            return step
        if isinstance(step, int):
            return TransportReply(step, b"{}")
        tag = step[0]
        if tag == "ok":
            return completion_reply(step[1])
        if tag == "stall":
            threading.Event().wait(step[1])
            return completion_reply("too late")
        raise AssertionError(f"unknown step {step!r}")


class EchoTransport:
    """Always succeeds, echoing the prompt content back; records requests so
    tests can assert exactly what went over the wire."""

    def __init__(self):
        self.requests: list[TransportRequest] = []

    def send(self, request: TransportRequest) -> TransportReply:
        self.requests.append(request)
        content = json.loads(request.body.decode("utf-8"))["messages"][0]["content"]
        return completion_reply("echo:" + content)


def wire_prompt(request: TransportRequest) -> str:
    """The prompt text exactly as it sits in the request body."""
    return json.loads(request.body.decode("utf-8"))["messages"][0]["content"]
