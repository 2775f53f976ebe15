"""Command-line entry point.

Subcommands: validate (dataset checks), render (annotated-image dump),
run (single marker/mention configuration), grid (full table), explain
(attention overlays for one record), fixtures (record live backend
responses into a replay directory). Exit code 0 only if everything
requested succeeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional

from .backends import (
    BridgeClient,
    FileTransport,
    RecordingTransport,
    open_backend,
    open_transport,
)
from .config import ExperimentConfig, GridCell, load_config
from .dataset import validate_dataset
from .errors import ConfigurationError, VpevalError
from .experiment import (
    GridResult,
    explain,
    markdown_table,
    render_annotated,
    run_grid,
    write_grid_outputs,
)
from .markers import MarkerKind

_MARKER_CHOICES = [kind.value for kind in MarkerKind]


def _load(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    updates = {}
    if args.backend is not None:
        updates["backend"] = args.backend
    if args.threshold is not None:
        updates["threshold"] = args.threshold
    if args.out is not None:
        updates["output_dir"] = Path(args.out)
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _client(cfg: ExperimentConfig) -> BridgeClient:
    if not cfg.backend:
        raise ConfigurationError("no backend configured (set backend: or pass --backend)")
    return open_backend(cfg.backend)


def _cell(cfg: ExperimentConfig, marker: str, mention: bool) -> GridCell:
    kind = MarkerKind(marker)
    for cell in cfg.grid:
        if cell.marker.kind is kind and cell.mention == mention:
            return cell
    style = cfg.grid[0].marker
    return GridCell(dataclasses.replace(style, kind=kind), mention)


def _emit_grid(cfg: ExperimentConfig, result: GridResult) -> int:
    paths = write_grid_outputs(result, cfg.output_dir)
    sys.stdout.write(markdown_table(result))
    print(f"wrote {paths['grid_csv']}")
    for row in result.rows:
        if not row.ok:
            print(f"failed: {row.cell.row_label} ({'yes' if row.cell.mention else 'no'}): "
                  f"{row.error}", file=sys.stderr)
    return 0 if result.all_ok else 1


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    records, problems = validate_dataset(cfg.dataset)
    print(f"{len(records)} records in {cfg.dataset.manifest_path}")
    for problem in problems:
        print(f"problem: {problem}", file=sys.stderr)
    return 0 if not problems else 1


def _cmd_render(args: argparse.Namespace) -> int:
    cfg = _load(args)
    client = open_backend(cfg.backend) if cfg.backend else None
    try:
        written, problems = render_annotated(cfg, client, cfg.output_dir)
    finally:
        if client is not None:
            client.close()
    print(f"wrote {len(written)} images to {cfg.output_dir}")
    for problem in problems:
        print(f"failed: {problem}", file=sys.stderr)
    return 0 if not problems else 1


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    cell = _cell(cfg, args.marker, args.mention)
    cfg = dataclasses.replace(cfg, grid=(cell,))
    with _client(cfg) as client:
        return _emit_grid(cfg, run_grid(cfg, client))


def _cmd_grid(args: argparse.Namespace) -> int:
    cfg = _load(args)
    with _client(cfg) as client:
        return _emit_grid(cfg, run_grid(cfg, client))


def _cmd_explain(args: argparse.Namespace) -> int:
    cfg = _load(args)
    cell = _cell(cfg, args.marker, args.mention)
    class_index: Optional[int] = None
    if args.class_name is not None:
        if args.class_name not in cfg.classes:
            raise ConfigurationError(
                f"class {args.class_name!r} not in {list(cfg.classes)}"
            )
        class_index = cfg.classes.index(args.class_name)
    with _client(cfg) as client:
        written = explain(cfg, client, args.record, cell, class_index, cfg.output_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_fixtures(args: argparse.Namespace) -> int:
    cfg = _load(args)
    if not cfg.backend:
        raise ConfigurationError("fixtures needs a live backend (--backend sidecar:... )")
    store_dir = Path(args.out) if args.out else cfg.output_dir / "fixtures"
    store_dir.mkdir(parents=True, exist_ok=True)
    store = FileTransport(store_dir)
    client = BridgeClient(RecordingTransport(open_transport(cfg.backend), store))
    with client:
        result = run_grid(cfg, client)
    print(f"recorded {len(store.keys())} responses into {store_dir}")
    for row in result.rows:
        if not row.ok:
            print(f"failed: {row.cell.row_label}: {row.error}", file=sys.stderr)
    return 0 if result.all_ok else 1


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (YAML)")
    common.add_argument("--backend", default=None,
                        help="override backend: file:<dir> | sidecar:<cmd> | tcp:<host>:<port>")
    common.add_argument("--threshold", type=float, default=None,
                        help="decision threshold on the malignancy probability")
    common.add_argument("--out", default=None, help="override output directory")

    parser = argparse.ArgumentParser(
        prog="vpeval",
        description="Zero-shot radiograph classification with drawn visual prompts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check manifest and images")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("render", parents=[common], help="dump annotated images")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("run", parents=[common], help="evaluate one configuration")
    p.add_argument("--marker", choices=_MARKER_CHOICES, default="none")
    p.add_argument("--mention", action="store_true", help="name the marker in the prompt")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("grid", parents=[common], help="evaluate the full marker/mention grid")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("explain", parents=[common], help="attention overlays for one record")
    p.add_argument("record", help="image_id from the manifest")
    p.add_argument("--marker", choices=_MARKER_CHOICES, default="circle")
    p.add_argument("--mention", action="store_true")
    p.add_argument("--class-name", dest="class_name", default=None,
                   help="restrict to one class (default: all)")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("fixtures", parents=[common],
                       help="record live backend responses into a replay directory")
    p.set_defaults(func=_cmd_fixtures)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except VpevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
