"""Command-line front door: lint packs, render prompts, manage the golden
corpus, send one-off completions, and run the service.

stdout carries only the artifact (a prompt or a completion); diagnostics go
to stderr. Exit codes: 0 success, 1 validation or lint failure, 2 usage
error, 3 gateway failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .gateway import GatewayError, complete
from .middleware import PromptRegistry, PromptRequest, ResolveError, resolve
from .packs import (
    PackError,
    default_feedback_pack_path,
    default_golden_path,
    default_pack_dir,
    generate_golden,
    lint_pack_file,
    load_pack_dir,
    load_pack_file,
    load_sample_texts,
    pack_files,
    read_golden_corpus,
    verify_golden,
    write_golden_corpus,
)
from .service import provider_config_from_env, settings_from_env
from .templates import RESERVED_INPUT_SLOT, ResolvedPrompt, Selection

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_GATEWAY = 3


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _pack_dir(args: argparse.Namespace) -> Path:
    if args.pack_dir:
        return Path(args.pack_dir)
    return Path(os.environ.get("PACK_DIR", str(default_pack_dir())))


def _parse_bindings(args: argparse.Namespace) -> dict[str, str] | None:
    """--set name=value pairs plus --input; returns None on malformed flags."""
    bindings: dict[str, str] = {}
    for pair in args.set or []:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            _err(f"--set expects name=value, got {pair!r}")
            return None
        bindings[name] = value
    if args.input is not None:
        if args.input == "-":
            bindings[RESERVED_INPUT_SLOT] = sys.stdin.read()
        else:
            path = Path(args.input)
            if not path.is_file():
                _err(f"input file not found: {path}")
                return None
            bindings[RESERVED_INPUT_SLOT] = path.read_text(encoding="utf-8")
    return bindings


def cmd_lint(args: argparse.Namespace) -> int:
    directory = _pack_dir(args)
    try:
        files = pack_files(directory)
    except NotADirectoryError as exc:
        _err(str(exc))
        return EXIT_USAGE
    diagnostics = [diag for path in files for diag in lint_pack_file(path)]
    if not files:
        _err(f"no pack files in {directory}")
        return EXIT_VALIDATION
    for diag in diagnostics:
        _err(str(diag))
    if diagnostics:
        _err(f"{len(diagnostics)} problem(s) found")
        return EXIT_VALIDATION
    _err(f"{len(files)} pack file(s) OK")
    return EXIT_OK


def _resolve_template(args: argparse.Namespace) -> tuple[ResolvedPrompt | None, int]:
    """Shared by render and send: resolve a template request to a prompt."""
    bindings = _parse_bindings(args)
    if bindings is None:
        return None, EXIT_USAGE
    try:
        registry, _version = load_pack_dir(_pack_dir(args))
    except (PackError, NotADirectoryError) as exc:
        _err(str(exc))
        return None, EXIT_USAGE
    try:
        request = PromptRequest.template(args.template_id, Selection(bindings))
    except ValueError as exc:
        _err(str(exc))
        return None, EXIT_USAGE
    outcome = resolve(registry, request)
    if isinstance(outcome, ResolveError):
        if outcome.report is not None:
            for item in outcome.report.items:
                _err(f"{item.code}: {item.message}")
        else:
            _err(f"{outcome.code}: {outcome.message}")
        return None, EXIT_VALIDATION
    return outcome, EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    prompt, code = _resolve_template(args)
    if prompt is None:
        return code
    sys.stdout.write(prompt.text)
    if args.newline:
        sys.stdout.write("\n")
    sys.stdout.flush()
    return EXIT_OK


def cmd_golden(args: argparse.Namespace) -> int:
    pack_path = Path(args.pack) if args.pack else default_feedback_pack_path()
    corpus_path = Path(args.corpus) if args.corpus else default_golden_path()
    try:
        pack = load_pack_file(pack_path)
    except PackError as exc:
        _err(str(exc))
        return EXIT_USAGE
    if len(pack.templates) != 1:
        _err(f"{pack_path}: expected exactly one template, found {len(pack.templates)}")
        return EXIT_USAGE
    entry = pack.templates[0]
    samples = load_sample_texts(args.samples)

    if args.write:
        cases = generate_golden(entry.template, entry.schema, samples)
        write_golden_corpus(corpus_path, pack.pack_version, cases)
        _err(f"wrote {len(cases)} golden case(s) to {corpus_path}")
        return EXIT_OK

    if not corpus_path.is_file():
        _err(f"golden corpus not found: {corpus_path} (run golden --write first)")
        return EXIT_USAGE
    try:
        corpus_version, cases = read_golden_corpus(corpus_path)
    except PackError as exc:
        _err(str(exc))
        return EXIT_USAGE
    if corpus_version != pack.pack_version:
        _err(
            f"corpus pack_version {corpus_version} does not match pack "
            f"pack_version {pack.pack_version}; regenerate with golden --write"
        )
        return EXIT_USAGE
    report = verify_golden(entry.template, entry.schema, cases)
    if not report.ok:
        for diff in report.items:
            _err(f"{diff.case_id}: {diff.message}")
        _err(f"{len(report.items)} case(s) diverged")
        return EXIT_VALIDATION
    _err(f"{len(cases)} golden case(s) verified")
    return EXIT_OK


def cmd_send(args: argparse.Namespace) -> int:
    if args.freeform is not None:
        outcome = resolve(PromptRegistry.empty(), PromptRequest.freeform(args.freeform))
        assert not isinstance(outcome, ResolveError)
        prompt = outcome
    elif args.template_id:
        prompt, code = _resolve_template(args)
        if prompt is None:
            return code
    else:
        _err("send needs either --freeform TEXT or a template id")
        return EXIT_USAGE

    config = provider_config_from_env()
    try:
        result = complete(config, prompt)
    except GatewayError as exc:
        _err(str(exc))
        return EXIT_GATEWAY
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    if args.json:
        print(
            json.dumps(
                {
                    "text": result.text,
                    "attempts": result.attempts,
                    "latency": result.latency,
                    "provider": {
                        "kind": result.provider.kind,
                        "model": result.provider.model,
                    },
                }
            )
        )
    else:
        print(result.text)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import run

    run(settings_from_env(), bind_addr=args.bind)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptware",
        description="Lint packs, render prompts, manage the golden corpus, "
        "send completions, run the service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_lint = sub.add_parser("lint", help="check every pack file in a directory")
    p_lint.add_argument("pack_dir", nargs="?", help="pack directory (default: bundled packs)")
    p_lint.set_defaults(func=cmd_lint)

    def add_template_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("template_id", nargs="?", help="template id to render")
        p.add_argument("--pack-dir", dest="pack_dir", help="pack directory")
        p.add_argument(
            "--set",
            action="append",
            metavar="NAME=VALUE",
            help="bind a slot (repeatable)",
        )
        p.add_argument(
            "--input",
            metavar="FILE",
            help="file with the writing sample, or - for stdin",
        )

    p_render = sub.add_parser("render", help="render a template to stdout")
    add_template_args(p_render)
    p_render.add_argument(
        "--newline", action="store_true", help="append a trailing newline to stdout"
    )
    p_render.set_defaults(func=cmd_render)

    p_golden = sub.add_parser("golden", help="regenerate or check the golden corpus")
    mode = p_golden.add_mutually_exclusive_group(required=True)
    mode.add_argument("--write", action="store_true", help="regenerate the corpus")
    mode.add_argument("--check", action="store_true", help="verify against the corpus")
    p_golden.add_argument("--pack", help="feedback pack file (default: bundled)")
    p_golden.add_argument("--corpus", help="corpus file (default: bundled)")
    p_golden.add_argument("--samples", help="directory of *.txt sample contexts")
    p_golden.set_defaults(func=cmd_golden)

    p_send = sub.add_parser("send", help="send one prompt to the configured provider")
    add_template_args(p_send)
    p_send.add_argument("--freeform", metavar="TEXT", help="send this text unchanged")
    p_send.add_argument("--json", action="store_true", help="print the full result as JSON")
    p_send.set_defaults(func=cmd_send)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--bind", metavar="HOST:PORT", help="bind address")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
