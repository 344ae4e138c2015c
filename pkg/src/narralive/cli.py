"""Command line entry point: validate, compile, simulate, publish, serve.

Exit codes: 0 success, 1 validation errors (or warnings under --strict),
2 I/O or protocol failure, 3 usage error. Every command is scriptable:
no prompts, and identical inputs produce identical output bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx

from narralive import analyzer, bundle, catalog, runtime, script
from narralive.diagnostics import InvalidStory, has_errors

OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_USAGE = 3

ZIP_MAGIC = b"PK\x03\x04"


class _UsageExit(Exception):
    def __init__(self, message: str):
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise _UsageExit(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="narralive", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a .story file and report on it")
    p.add_argument("file", help="story source (.story)")
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.add_argument("--strict", action="store_true", help="warnings also fail (exit 1)")
    p.add_argument("--assets", metavar="DIR", help="check asset paths under DIR")

    p = sub.add_parser("compile", help="compile a story plus assets into a bundle")
    p.add_argument("file", help="story source (.story)")
    p.add_argument("--assets", metavar="DIR", required=True)
    p.add_argument("--version", type=int, required=True)
    p.add_argument("--out", metavar="BUNDLE", required=True)
    p.add_argument("--erl", type=int, help="override the estimated readiness level")
    p.add_argument(
        "--published-at", default=bundle.EPOCH_ISO,
        help="ISO-8601 UTC publish stamp (a fixed epoch by default, for determinism)",
    )

    p = sub.add_parser("simulate", help="run an event script through a story")
    p.add_argument("input", help=".story source or bundle.zip")
    p.add_argument("--events", metavar="FILE", help="JSON Lines, one event per line")

    p = sub.add_parser("publish", help="POST a bundle to a catalog server")
    p.add_argument("bundle", help="bundle.zip produced by compile")
    p.add_argument("--server", metavar="URL", required=True)

    p = sub.add_parser("serve", help="run the catalog service")
    p.add_argument("--store", metavar="DIR", default=os.environ.get(catalog.STORE_DIR_ENV))
    p.add_argument(
        "--bind", metavar="ADDR",
        default=os.environ.get(catalog.BIND_ADDR_ENV, catalog.DEFAULT_BIND),
    )
    return parser


def _print_diagnostics(diagnostics, out) -> None:
    for diag in diagnostics:
        print(f"  {diag}", file=out)


def _report_human(report: analyzer.Report, out) -> None:
    errors = sum(1 for d in report.diagnostics if d.severity == "error")
    warnings = len(report.diagnostics) - errors
    print(f"{errors} error(s), {warnings} warning(s)", file=out)
    _print_diagnostics(report.diagnostics, out)
    if report.stats is None:
        return
    s = report.stats
    print(f"structure: {report.structure}", file=out)
    print(f"experience type: {report.experience_type}", file=out)
    print(f"erl: {report.erl}", file=out)
    print(
        f"chapters {s.chapters} | scenes {s.scenes} | pages {sum(s.pages.values())} "
        f"| menus {sum(s.menus.values())} | endings {s.endings} "
        f"| max menu depth {s.max_menu_depth} | choice paths {s.choice_paths}"
        + (" (truncated)" if s.choice_paths_truncated else ""),
        file=out,
    )


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _parse_story_file(path: str, out):
    result = script.parse(_read_text(path))
    if not result.ok:
        print(f"{path}: does not parse", file=out)
        _print_diagnostics(result.diagnostics, out)
        return None
    return result.story


def cmd_validate(args, out) -> int:
    text = _read_text(args.file)
    parsed = script.parse(text)
    if parsed.ok:
        report = analyzer.analyze(parsed.story, asset_root=args.assets)
        report = analyzer.Report(
            diagnostics=list(parsed.diagnostics) + list(report.diagnostics),
            stats=report.stats,
            structure=report.structure,
            experience_type=report.experience_type,
            erl=report.erl,
        )
    else:
        report = analyzer.Report(diagnostics=parsed.diagnostics)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True), file=out)
    else:
        _report_human(report, out)
    if has_errors(report.diagnostics):
        return EXIT_VALIDATION
    if args.strict and report.diagnostics:
        return EXIT_VALIDATION
    return OK


def cmd_compile(args, out) -> int:
    story = _parse_story_file(args.file, out)
    if story is None:
        return EXIT_VALIDATION
    erl = args.erl if args.erl is not None else analyzer.estimate_erl(story)
    try:
        data = bundle.compile(
            story, args.assets, version=args.version, erl=erl,
            published_at=args.published_at,
        )
    except bundle.MissingAsset as exc:
        print(f"error: {exc}", file=out)
        return EXIT_VALIDATION
    except InvalidStory as exc:
        print(f"error: {exc}", file=out)
        for diag in exc.diagnostics:
            print(f"  {diag}", file=out)
        return EXIT_VALIDATION
    except ValueError as exc:
        raise _UsageExit(str(exc))
    try:
        Path(args.out).write_bytes(data)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=out)
        return EXIT_IO
    manifest, _ = bundle.load(data)
    print(f"wrote {args.out}: {len(data)} bytes", file=out)
    print(
        f"{manifest.story_id} v{manifest.version} erl={manifest.erl_estimate} "
        f"assets={len(manifest.assets)} content_hash={manifest.content_hash}",
        file=out,
    )
    for menu_id, option_id, payload in bundle.generated_qr_payloads(story):
        print(f"qr {menu_id}/{option_id}: {payload}", file=out)
    return OK


def cmd_simulate(args, out) -> int:
    raw = Path(args.input).read_bytes()
    if raw[:4] == ZIP_MAGIC:
        try:
            _, story = bundle.load(raw)
        except bundle.BundleError as exc:
            print(f"error: {exc}", file=out)
            return EXIT_IO
    else:
        story = _parse_story_file(args.input, out)
        if story is None:
            return EXIT_VALIDATION
    events = []
    if args.events:
        try:
            events = runtime.events_from_jsonl(_read_text(args.events))
        except ValueError as exc:
            raise _UsageExit(f"invalid events file {args.events}: {exc}")
    try:
        transcript = runtime.simulate(story, events)
    except InvalidStory as exc:
        print(f"error: {exc}", file=out)
        return EXIT_VALIDATION
    out.write(transcript.to_jsonl())
    return OK


def cmd_publish(args, out) -> int:
    data = Path(args.bundle).read_bytes()
    url = args.server.rstrip("/") + "/api/experiences"
    try:
        response = httpx.post(
            url, content=data, headers={"content-type": "application/zip"}, timeout=30
        )
    except httpx.HTTPError as exc:
        print(f"error: cannot reach {args.server}: {exc}", file=out)
        return EXIT_IO
    if response.status_code == 201:
        entry = response.json()
        print(
            f"published {entry['story_id']} v{entry['version']} "
            f"({entry['bundle_bytes']} bytes)",
            file=out,
        )
        return OK
    if response.status_code in (409, 422):
        detail = response.json().get("detail", response.text)
        label = "VersionConflict" if response.status_code == 409 else "InvalidBundle"
        print(f"error: {label}: {detail}", file=out)
        return EXIT_VALIDATION
    print(f"error: server answered {response.status_code}: {response.text}", file=out)
    return EXIT_IO


def cmd_serve(args, out) -> int:
    if not args.store:
        raise _UsageExit(f"--store is required (or set {catalog.STORE_DIR_ENV})")
    try:
        catalog.serve(args.store, args.bind)
    except KeyboardInterrupt:
        pass
    return OK


_COMMANDS = {
    "validate": cmd_validate,
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "publish": cmd_publish,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, sys.stdout)
    except _UsageExit as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
