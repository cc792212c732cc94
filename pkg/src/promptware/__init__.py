"""promptware: map UI affordances to LLM prompts.

Three resolution modes behind one resolver: static prompts registered
behind buttons, templates filled from UI option selections, and freeform
passthrough. Ships a template engine, pack file format, provider gateway
with a deterministic mock, an HTTP service, and a CLI.
"""

from .gateway import (
    CompletionResult,
    GatewayError,
    ProviderConfig,
    complete,
    mock_complete,
)
from .middleware import (
    Mode,
    PromptRegistry,
    PromptRequest,
    ResolveError,
    StaticPrompt,
    register_static,
    resolve,
)
from .packs import (
    GoldenCase,
    Pack,
    PackError,
    enumerate_combinations,
    generate_golden,
    load_feedback_pack,
    load_pack_dir,
    load_pack_file,
    verify_golden,
)
from .templates import (
    Choice,
    OptionSchema,
    Provenance,
    ResolvedPrompt,
    Segment,
    Selection,
    SlotKind,
    SlotSpec,
    Template,
    TemplateParseError,
    ValidationReport,
    parse_template,
    render,
    serialize,
    validate_selection,
)

__version__ = "0.1.0"

__all__ = [
    "Choice",
    "CompletionResult",
    "GatewayError",
    "GoldenCase",
    "Mode",
    "OptionSchema",
    "Pack",
    "PackError",
    "PromptRegistry",
    "PromptRequest",
    "ProviderConfig",
    "Provenance",
    "ResolveError",
    "ResolvedPrompt",
    "Segment",
    "Selection",
    "SlotKind",
    "SlotSpec",
    "StaticPrompt",
    "Template",
    "TemplateParseError",
    "ValidationReport",
    "complete",
    "enumerate_combinations",
    "generate_golden",
    "load_feedback_pack",
    "load_pack_dir",
    "load_pack_file",
    "mock_complete",
    "parse_template",
    "register_static",
    "render",
    "resolve",
    "serialize",
    "validate_selection",
    "verify_golden",
]
