"""Pack files: the on-disk format for templates, option schemas, and statics.

A pack is one UTF-8 JSON document:

    {
      "pack_version": 1,
      "templates": [
        {"id": ..., "name": ..., "version": ..., "template_text": ...,
         "slots": [{"name", "label", "kind", "choices", "default"}, ...]}
      ],
      "statics": [{"id": ..., "label": ..., "body": ...}, ...]
    }

``template_text`` is unparsed template source; loading parses it and
rejects packs whose template/schema cross-references do not line up. The
module also owns the feedback-domain helpers: enumerating every option
combination for a fixed writing sample and checking a committed golden
corpus byte-for-byte.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from .middleware import PromptRegistry, RegisteredTemplate, StaticPrompt
from .templates import (
    RESERVED_INPUT_SLOT,
    Choice,
    OptionSchema,
    ResolvedPrompt,
    Selection,
    SlotKind,
    SlotSpec,
    Template,
    TemplateParseError,
    ValidationReport,
    cross_check,
    parse_template,
    render,
)

E_PACK_MALFORMED = "E_PACK_MALFORMED"


class PackError(Exception):
    """A pack document is unusable; ``field_path`` points at the bad field."""

    code = E_PACK_MALFORMED

    def __init__(self, message: str, *, field_path: str = "", file: str = ""):
        location = f"{file}: " if file else ""
        field = f"{field_path}: " if field_path else ""
        super().__init__(f"{location}{field}{message}")
        self.reason = message
        self.field_path = field_path
        self.file = file


@dataclass(frozen=True)
class PackDiagnostic:
    file: str
    field_path: str
    message: str

    def __str__(self) -> str:
        return f"{self.file}: {self.field_path or '<document>'}: {self.message}"


@dataclass(frozen=True)
class Pack:
    pack_version: int
    templates: tuple[RegisteredTemplate, ...]
    statics: tuple[StaticPrompt, ...]
    source: str


def _require(obj: Mapping, key: str, kind: type, path: str, file: str):
    field_path = f"{path}.{key}" if path else key
    if key not in obj:
        raise PackError(f"missing required field {key!r}", field_path=field_path, file=file)
    value = obj[key]
    if (kind is int and isinstance(value, bool)) or not isinstance(value, kind):
        raise PackError(
            f"field {key!r} must be {kind.__name__}, got {type(value).__name__}",
            field_path=field_path,
            file=file,
        )
    return value


def _slot_spec_from_obj(obj, path: str, file: str) -> SlotSpec:
    if not isinstance(obj, dict):
        raise PackError("slot spec must be an object", field_path=path, file=file)
    name = _require(obj, "name", str, path, file)
    label = _require(obj, "label", str, path, file)
    kind_raw = _require(obj, "kind", str, path, file)
    try:
        kind = SlotKind(kind_raw)
    except ValueError:
        raise PackError(
            f"unknown slot kind {kind_raw!r}", field_path=f"{path}.kind", file=file
        ) from None
    choices_raw = obj.get("choices", [])
    if not isinstance(choices_raw, list):
        raise PackError("choices must be an array", field_path=f"{path}.choices", file=file)
    choices = []
    for i, choice_obj in enumerate(choices_raw):
        choice_path = f"{path}.choices[{i}]"
        if not isinstance(choice_obj, dict):
            raise PackError("choice must be an object", field_path=choice_path, file=file)
        choices.append(
            Choice(
                value=_require(choice_obj, "value", str, choice_path, file),
                label=_require(choice_obj, "label", str, choice_path, file),
            )
        )
    default = obj.get("default")
    if default is not None and not isinstance(default, str):
        raise PackError("default must be a string", field_path=f"{path}.default", file=file)
    try:
        return SlotSpec(name=name, label=label, kind=kind, choices=tuple(choices), default=default)
    except ValueError as exc:
        raise PackError(str(exc), field_path=path, file=file) from exc


def slot_spec_to_obj(spec: SlotSpec) -> dict:
    obj: dict = {"name": spec.name, "label": spec.label, "kind": spec.kind.value}
    if spec.kind is SlotKind.SINGLE_CHOICE:
        obj["choices"] = [{"value": c.value, "label": c.label} for c in spec.choices]
    if spec.default is not None:
        obj["default"] = spec.default
    return obj


def _template_from_obj(obj, path: str, file: str) -> RegisteredTemplate:
    if not isinstance(obj, dict):
        raise PackError("template entry must be an object", field_path=path, file=file)
    template_id = _require(obj, "id", str, path, file)
    name = _require(obj, "name", str, path, file)
    version = _require(obj, "version", int, path, file)
    text = _require(obj, "template_text", str, path, file)
    slots_raw = _require(obj, "slots", list, path, file)
    try:
        template = parse_template(text, template_id=template_id, name=name, version=version)
    except (TemplateParseError, ValueError) as exc:
        raise PackError(str(exc), field_path=f"{path}.template_text", file=file) from exc
    slots = tuple(
        _slot_spec_from_obj(slot_obj, f"{path}.slots[{i}]", file)
        for i, slot_obj in enumerate(slots_raw)
    )
    try:
        schema = OptionSchema(template_id=template_id, slots=slots)
    except ValueError as exc:
        raise PackError(str(exc), field_path=f"{path}.slots", file=file) from exc
    problems = cross_check(template, schema)
    if problems:
        raise PackError("; ".join(problems), field_path=f"{path}.slots", file=file)
    return RegisteredTemplate(template, schema)


def _static_from_obj(obj, path: str, file: str) -> StaticPrompt:
    if not isinstance(obj, dict):
        raise PackError("static entry must be an object", field_path=path, file=file)
    static_id = _require(obj, "id", str, path, file)
    label = _require(obj, "label", str, path, file)
    body = _require(obj, "body", str, path, file)
    try:
        return StaticPrompt(id=static_id, label=label, body=body)
    except ValueError as exc:
        raise PackError(str(exc), field_path=path, file=file) from exc


def _load_document(path: Path) -> tuple[dict, str]:
    file = str(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PackError(f"cannot read pack: {exc}", file=file) from exc
    if not raw.strip():
        raise PackError("pack file is empty", file=file)
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise PackError(f"invalid JSON: {exc}", file=file) from exc
    if not isinstance(doc, dict):
        raise PackError("pack document must be a JSON object", file=file)
    return doc, file


def load_pack_file(path: Path | str) -> Pack:
    """Load one pack document; raises PackError on the first problem."""
    doc, file = _load_document(Path(path))
    version = _require(doc, "pack_version", int, "", file)
    templates_raw = doc.get("templates", [])
    statics_raw = doc.get("statics", [])
    if not isinstance(templates_raw, list):
        raise PackError("templates must be an array", field_path="templates", file=file)
    if not isinstance(statics_raw, list):
        raise PackError("statics must be an array", field_path="statics", file=file)
    templates = tuple(
        _template_from_obj(obj, f"templates[{i}]", file) for i, obj in enumerate(templates_raw)
    )
    statics = tuple(
        _static_from_obj(obj, f"statics[{i}]", file) for i, obj in enumerate(statics_raw)
    )
    return Pack(pack_version=version, templates=templates, statics=statics, source=file)


def lint_pack_file(path: Path | str) -> list[PackDiagnostic]:
    """Best-effort check of one pack file: collects every violation it can
    find instead of stopping at the first."""
    diagnostics: list[PackDiagnostic] = []
    try:
        doc, file = _load_document(Path(path))
    except PackError as exc:
        return [PackDiagnostic(exc.file, exc.field_path, exc.reason)]

    try:
        _require(doc, "pack_version", int, "", file)
    except PackError as exc:
        diagnostics.append(PackDiagnostic(file, exc.field_path, exc.reason))

    for section, builder in (("templates", _template_from_obj), ("statics", _static_from_obj)):
        entries = doc.get(section, [])
        if not isinstance(entries, list):
            diagnostics.append(PackDiagnostic(file, section, "must be an array"))
            continue
        for i, obj in enumerate(entries):
            try:
                builder(obj, f"{section}[{i}]", file)
            except PackError as exc:
                diagnostics.append(PackDiagnostic(file, exc.field_path, exc.reason))
    return diagnostics


def pack_files(pack_dir: Path | str) -> list[Path]:
    directory = Path(pack_dir)
    if not directory.is_dir():
        raise NotADirectoryError(f"pack directory not found: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix == ".json" and p.is_file())


def load_pack_dir(pack_dir: Path | str) -> tuple[PromptRegistry, int]:
    """Load every ``*.json`` pack in a directory into one registry.

    Returns the registry and the directory's pack version (the maximum over
    its files). Duplicate ids across files are a PackError.
    """
    registry = PromptRegistry.empty()
    version = 0
    files = pack_files(pack_dir)
    if not files:
        raise PackError(f"no pack files in {pack_dir}", file=str(pack_dir))
    for path in files:
        pack = load_pack_file(path)
        version = max(version, pack.pack_version)
        try:
            for entry in pack.templates:
                registry = registry.with_template(entry.template, entry.schema)
            for static in pack.statics:
                registry = registry.with_static(static)
        except ValueError as exc:
            raise PackError(str(exc), file=str(path)) from exc
    return registry, version


def load_feedback_pack(path: Path | str) -> tuple[Template, OptionSchema, list[StaticPrompt]]:
    """Load a single-template pack: the feedback template, its schema, and
    any bundled static prompts."""
    pack = load_pack_file(path)
    if len(pack.templates) != 1:
        raise PackError(
            f"expected exactly one template, found {len(pack.templates)}",
            field_path="templates",
            file=pack.source,
        )
    entry = pack.templates[0]
    return entry.template, entry.schema, list(pack.statics)


def enumerate_combinations(
    template: Template, schema: OptionSchema, fixed_input: str
) -> list[tuple[Selection, ResolvedPrompt]]:
    """Render the full Cartesian product over the schema's single-choice
    slots, with ``fixed_input`` bound to the reserved input slot."""
    if not fixed_input:
        raise ValueError("fixed_input must be nonempty")
    single = schema.single_choice_slots()
    free_text = [
        s.name
        for s in schema.slots
        if s.kind is SlotKind.FREE_TEXT and s.name != RESERVED_INPUT_SLOT
    ]
    if free_text:
        raise ValueError(f"schema has free-text slots besides 'input': {free_text}")
    results: list[tuple[Selection, ResolvedPrompt]] = []
    for values in itertools.product(*(s.choice_values() for s in single)):
        bindings = {spec.name: value for spec, value in zip(single, values)}
        if RESERVED_INPUT_SLOT in template.slot_names():
            bindings[RESERVED_INPUT_SLOT] = fixed_input
        rendered = render(template, schema, Selection(bindings))
        if isinstance(rendered, ValidationReport):
            raise ValueError(f"combination failed validation: {rendered.codes()}")
        results.append((Selection(bindings), rendered))
    return results


@dataclass(frozen=True)
class GoldenCase:
    """One committed expectation: a selection and its byte-exact prompt."""

    case_id: str
    selection: Selection
    expected_prompt: str


@dataclass(frozen=True)
class GoldenDiff:
    case_id: str
    byte_offset: int
    message: str


@dataclass(frozen=True)
class DiffReport:
    items: tuple[GoldenDiff, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.items


def _first_divergence(expected: bytes, actual: bytes) -> int:
    limit = min(len(expected), len(actual))
    for i in range(limit):
        if expected[i] != actual[i]:
            return i
    return limit


def generate_golden(
    template: Template, schema: OptionSchema, samples: Mapping[str, str]
) -> list[GoldenCase]:
    """Build the full golden corpus: every option combination for every
    sample context, in deterministic order."""
    cases: list[GoldenCase] = []
    for context, sample in samples.items():
        for selection, rendered in enumerate_combinations(template, schema, sample):
            values = [
                selection.bindings[s.name] for s in schema.single_choice_slots()
            ]
            case_id = "|".join([context, *values])
            cases.append(GoldenCase(case_id, selection, rendered.text))
    return cases


def verify_golden(
    template: Template, schema: OptionSchema, cases: list[GoldenCase]
) -> DiffReport:
    """Re-render every case and compare byte-for-byte against expectations."""
    diffs: list[GoldenDiff] = []
    for case in cases:
        rendered = render(template, schema, case.selection)
        if isinstance(rendered, ValidationReport):
            diffs.append(
                GoldenDiff(case.case_id, 0, f"selection no longer validates: {rendered.codes()}")
            )
            continue
        expected = case.expected_prompt.encode("utf-8")
        actual = rendered.text.encode("utf-8")
        if expected != actual:
            offset = _first_divergence(expected, actual)
            diffs.append(
                GoldenDiff(
                    case.case_id,
                    offset,
                    f"prompt diverges at byte {offset} "
                    f"(expected {len(expected)} bytes, got {len(actual)})",
                )
            )
    return DiffReport(tuple(diffs))


def write_golden_corpus(path: Path | str, pack_version: int, cases: list[GoldenCase]) -> None:
    doc = {
        "pack_version": pack_version,
        "cases": [
            {
                "case_id": c.case_id,
                "selection": dict(c.selection.bindings),
                "expected_prompt": c.expected_prompt,
            }
            for c in cases
        ],
    }
    Path(path).write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def read_golden_corpus(path: Path | str) -> tuple[int, list[GoldenCase]]:
    doc, file = _load_document(Path(path))
    version = _require(doc, "pack_version", int, "", file)
    cases_raw = _require(doc, "cases", list, "", file)
    cases = []
    for i, obj in enumerate(cases_raw):
        path_i = f"cases[{i}]"
        if not isinstance(obj, dict):
            raise PackError("case must be an object", field_path=path_i, file=file)
        case_id = _require(obj, "case_id", str, path_i, file)
        selection_raw = _require(obj, "selection", dict, path_i, file)
        expected = _require(obj, "expected_prompt", str, path_i, file)
        try:
            selection = Selection(selection_raw)
        except ValueError as exc:
            raise PackError(str(exc), field_path=f"{path_i}.selection", file=file) from exc
        cases.append(GoldenCase(case_id, selection, expected))
    return version, cases


def _data_root() -> Path:
    return Path(str(resources.files("promptware"))) / "data"


def default_pack_dir() -> Path:
    """Directory of packs bundled with the package."""
    return _data_root() / "packs"


def default_feedback_pack_path() -> Path:
    return default_pack_dir() / "feedback.json"


def default_golden_path() -> Path:
    return _data_root() / "golden" / "feedback_golden.json"


def load_sample_texts(samples_dir: Path | str | None = None) -> dict[str, str]:
    """Bundled writing samples, keyed by file stem, in name order. A single
    trailing newline from the file is not part of the sample."""
    directory = Path(samples_dir) if samples_dir is not None else _data_root() / "samples"
    samples: dict[str, str] = {}
    for path in sorted(directory.glob("*.txt")):
        text = path.read_text(encoding="utf-8")
        samples[path.stem] = text[:-1] if text.endswith("\n") else text
    return samples
