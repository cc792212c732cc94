"""Three ways to turn a UI action into a prompt, behind one resolver.

A request is either static (a registered, expert-authored prompt behind a
button), template (a registered template filled from UI selections), or
freeform (user text passed through untouched). Registries are immutable
snapshots: updates return new registries, so concurrent readers always see
a complete, consistent view.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping

from .templates import (
    MODE_FREEFORM,
    MODE_STATIC,
    MODE_TEMPLATE,
    OptionSchema,
    Provenance,
    ResolvedPrompt,
    Selection,
    Template,
    ValidationReport,
    render,
)

E_DUPLICATE_ID = "E_DUPLICATE_ID"
E_UNKNOWN_STATIC = "E_UNKNOWN_STATIC"
E_UNKNOWN_TEMPLATE = "E_UNKNOWN_TEMPLATE"
E_VALIDATION = "E_VALIDATION"


class Mode(str, Enum):
    STATIC = MODE_STATIC
    TEMPLATE = MODE_TEMPLATE
    FREEFORM = MODE_FREEFORM


@dataclass(frozen=True)
class StaticPrompt:
    """A fixed prompt bound to a single UI control."""

    id: str
    label: str
    body: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("static prompt id must be nonempty")
        if not self.body:
            raise ValueError("static prompt body must be nonempty")


@dataclass(frozen=True)
class PromptRequest:
    """A mode-tagged request; only the active mode's fields are populated."""

    mode: Mode
    static_id: str | None = None
    template_id: str | None = None
    selection: Selection | None = None
    freeform_text: str | None = None

    def __post_init__(self) -> None:
        populated = {
            "static_id": self.static_id is not None,
            "template_id": self.template_id is not None,
            "selection": self.selection is not None,
            "freeform_text": self.freeform_text is not None,
        }
        expected = {
            Mode.STATIC: {"static_id"},
            Mode.TEMPLATE: {"template_id", "selection"},
            Mode.FREEFORM: {"freeform_text"},
        }[self.mode]
        actual = {field for field, is_set in populated.items() if is_set}
        if actual != expected:
            raise ValueError(
                f"{self.mode.value} request must populate exactly {sorted(expected)}, "
                f"got {sorted(actual)}"
            )

    @classmethod
    def static(cls, static_id: str) -> "PromptRequest":
        return cls(Mode.STATIC, static_id=static_id)

    @classmethod
    def template(cls, template_id: str, selection: Selection) -> "PromptRequest":
        return cls(Mode.TEMPLATE, template_id=template_id, selection=selection)

    @classmethod
    def freeform(cls, text: str) -> "PromptRequest":
        return cls(Mode.FREEFORM, freeform_text=text)


class DuplicateIdError(ValueError):
    """Registering an id that is already present; entries are immutable."""

    code = E_DUPLICATE_ID

    def __init__(self, kind: str, duplicate_id: str):
        super().__init__(f"{kind} id {duplicate_id!r} is already registered")
        self.duplicate_id = duplicate_id


@dataclass(frozen=True)
class RegisteredTemplate:
    template: Template
    schema: OptionSchema


@dataclass(frozen=True)
class PromptRegistry:
    """Immutable snapshot of everything resolvable: templates and statics."""

    templates: Mapping[str, RegisteredTemplate]
    statics: Mapping[str, StaticPrompt]

    def __post_init__(self) -> None:
        object.__setattr__(self, "templates", dict(self.templates))
        object.__setattr__(self, "statics", dict(self.statics))

    @classmethod
    def empty(cls) -> "PromptRegistry":
        return cls(templates={}, statics={})

    def with_template(self, template: Template, schema: OptionSchema) -> "PromptRegistry":
        if template.id in self.templates:
            raise DuplicateIdError("template", template.id)
        if schema.template_id != template.id:
            raise ValueError(
                f"schema targets {schema.template_id!r}, not template {template.id!r}"
            )
        updated = dict(self.templates)
        updated[template.id] = RegisteredTemplate(template, schema)
        return replace(self, templates=updated)

    def with_static(self, prompt: StaticPrompt) -> "PromptRegistry":
        if prompt.id in self.statics:
            raise DuplicateIdError("static prompt", prompt.id)
        updated = dict(self.statics)
        updated[prompt.id] = prompt
        return replace(self, statics=updated)


def register_static(registry: PromptRegistry, prompt: StaticPrompt) -> PromptRegistry:
    """Functional registration: returns a new registry, never mutates."""
    return registry.with_static(prompt)


@dataclass(frozen=True)
class ResolveError:
    """Resolution failure as a value, so callers map it to wire errors."""

    code: str
    message: str
    report: ValidationReport | None = None


def resolve(registry: PromptRegistry, request: PromptRequest) -> ResolvedPrompt | ResolveError:
    """Produce the exact prompt text for a request, or a typed error.

    Static mode returns the registered body unchanged; template mode
    delegates to the template engine; freeform mode is the identity on the
    submitted text.
    """
    if request.mode is Mode.FREEFORM:
        assert request.freeform_text is not None
        return ResolvedPrompt(request.freeform_text, Provenance(MODE_FREEFORM))

    if request.mode is Mode.STATIC:
        prompt = registry.statics.get(request.static_id or "")
        if prompt is None:
            return ResolveError(
                E_UNKNOWN_STATIC, f"no static prompt registered with id {request.static_id!r}"
            )
        return ResolvedPrompt(prompt.body, Provenance(MODE_STATIC, source_id=prompt.id))

    entry = registry.templates.get(request.template_id or "")
    if entry is None:
        return ResolveError(
            E_UNKNOWN_TEMPLATE, f"no template registered with id {request.template_id!r}"
        )
    assert request.selection is not None
    result = render(entry.template, entry.schema, request.selection)
    if isinstance(result, ValidationReport):
        return ResolveError(E_VALIDATION, "selection failed validation", report=result)
    return result
