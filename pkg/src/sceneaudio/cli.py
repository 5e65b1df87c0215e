"""Command-line entry point: geometry, render, metrics, and pipeline modes.

Config flags mirror the config dataclasses one-to-one with dotted names
(e.g. ``--render.speed-of-sound``); common ones also have short aliases.
Precedence per field: CLI flag > scene file > config file named by
``SCENEAUDIO_CONFIG`` > built-in default. Exit codes: 0 success,
2 validation, 3 file problems, 4 anything else.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import shlex
import subprocess
import sys
from pathlib import Path

from . import __version__
from . import io as sio
from .errors import FileError, SceneAudioError, ValidationError
from .geometry import MappingConfig, detect_regions
from .io import RenderParams
from .metrics import MetricConfig, compare, config_dict
from .render import MicArray, RoomConfig, render

log = logging.getLogger(__name__)

ENV_CONFIG = "SCENEAUDIO_CONFIG"
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_FILE = 3
EXIT_INTERNAL = 4
DEFAULT_MIN_AREA = 0.005
_CONFIG_KEYS = ("render", "mapping", "metrics", "min_area")

_FLAG_ALIASES = {
    ("render", "sample_rate"): ["--sample-rate"],
    ("render", "fractional_delay"): ["--fractional-delay"],
    ("render", "lfe_lowpass"): ["--lfe-lowpass"],
}


def _add_config_flags(parser, prefix: str, cls, skip=()):
    """One dotted flag per dataclass field; booleans get --no- variants."""
    group = parser.add_argument_group(f"{prefix} overrides")
    for field in dataclasses.fields(cls):
        if field.name in skip:
            continue
        dest = f"{prefix}_{field.name}"
        names = list(_FLAG_ALIASES.get((prefix, field.name), []))
        names.append(f"--{prefix}.{field.name.replace('_', '-')}")
        default = field.default
        if isinstance(default, bool):
            group.add_argument(*names, dest=dest, action=argparse.BooleanOptionalAction, default=None)
        elif isinstance(default, int):
            group.add_argument(*names, dest=dest, type=int, default=None, metavar="N")
        elif isinstance(default, float):
            group.add_argument(*names, dest=dest, type=float, default=None, metavar="X")
        else:
            group.add_argument(*names, dest=dest, type=str, default=None, metavar="S")


def _config_overrides(args, prefix: str, cls, skip=()) -> dict:
    out = {}
    for field in dataclasses.fields(cls):
        if field.name in skip:
            continue
        value = getattr(args, f"{prefix}_{field.name}", None)
        if value is not None:
            out[field.name] = value
    return out


def _env_defaults() -> dict:
    path = os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    doc = sio.read_json(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config root must be an object")
    unknown = sorted(set(doc) - set(_CONFIG_KEYS))
    if unknown:
        raise ValidationError(f"{path}: unknown config key(s) {unknown}")
    return doc


def _checked_block(block, cls, context: str) -> dict:
    """Validate a loose config block against a config dataclass."""
    if not isinstance(block, dict):
        raise ValidationError(f"{context} must be an object")
    fields = {f.name: f.default for f in dataclasses.fields(cls)}
    out = {}
    for key, value in block.items():
        if key not in fields:
            raise ValidationError(f"{context}: unknown key {key!r}")
        default = fields[key]
        if isinstance(default, bool):
            ok = isinstance(value, bool)
        elif isinstance(default, int):
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif isinstance(default, float):
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        else:
            ok = isinstance(value, str)
        if not ok:
            raise ValidationError(f"{context}.{key}: wrong type {type(value).__name__}")
        out[key] = float(value) if isinstance(default, float) else value
    return out


def _min_area(args, env) -> float:
    if args.min_area is not None:
        value = args.min_area
    elif "min_area" in env:
        value = env["min_area"]
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValidationError("config.min_area must be a number")
    else:
        value = DEFAULT_MIN_AREA
    return float(value)


def _mapping_config(args, env) -> MappingConfig:
    merged = {
        **_checked_block(env.get("mapping", {}), MappingConfig, "config.mapping"),
        **_config_overrides(args, "mapping", MappingConfig),
    }
    return MappingConfig(**merged)


def _metric_config(args, env) -> MetricConfig:
    merged = {
        **_checked_block(env.get("metrics", {}), MetricConfig, "config.metrics"),
        **_config_overrides(args, "metrics", MetricConfig),
    }
    return MetricConfig(**merged)


def _render_scene(scene):
    placements = sio.scene_placements(scene)
    cfg = RoomConfig.from_image_dims(
        scene.image_width,
        scene.image_height,
        sample_rate=scene.render.sample_rate,
        speed_of_sound=scene.render.speed_of_sound,
        attenuation_clamp=scene.render.attenuation_clamp,
        fractional_delay=scene.render.fractional_delay,
        lfe_lowpass=scene.render.lfe_lowpass,
    )
    return render(placements, MicArray.default(), cfg)


def cmd_geometry(args, env) -> int:
    mask = sio.load_mask(args.mask)
    depth = sio.load_depth(args.depth)
    mapping = _mapping_config(args, env)
    regions = detect_regions(mask, depth, min_area_frac=_min_area(args, env))
    log.info("geometry: %d region(s) from %dx%d mask", len(regions), mask.width, mask.height)
    sio.write_json(sio.regions_document(regions, (mask.width, mask.height), mapping), args.output)
    return EXIT_OK


def cmd_render(args, env) -> int:
    scene = sio.load_scene(
        args.scene,
        render_overrides=_config_overrides(args, "render", RenderParams),
        mapping_overrides=_config_overrides(args, "mapping", MappingConfig),
        defaults=env,
    )
    audio = _render_scene(scene)
    sio.write_multichannel_wav(audio, args.output, scene.render.output_format)
    log.info(
        "render: %d source(s) -> %s (%d samples at %d Hz, %s)",
        len(scene.regions), args.output, audio.channels.shape[1],
        audio.sample_rate, scene.render.output_format,
    )
    return EXIT_OK


def _read_pair_manifest(path) -> list[tuple[Path, Path]]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise FileError(f"{path}: file not found") from None
    except OSError as exc:
        raise FileError(f"{path}: cannot read ({exc})") from None
    pairs = []
    for number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(",")] if "," in text else text.split()
        if len(parts) != 2 or not all(parts):
            raise ValidationError(f"{path}:{number}: expected two paths per line, got {text!r}")
        pairs.append(tuple(path.parent / p if not Path(p).is_absolute() else Path(p) for p in parts))
    if not pairs:
        raise ValidationError(f"{path}: manifest lists no pairs")
    return pairs


def _summary_line(report) -> str:
    return (
        f"mfcc_dtw={report.mfcc_dtw:.6g} zcr={report.zcr:.6g} "
        f"chroma={report.chroma:.6g} spectral_contrast={report.spectral_contrast:.6g}"
    )


def _write_csv(rows, path):
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["pair_a", "pair_b", "mfcc_dtw", "zcr", "chroma", "spectral_contrast"])
            for a, b, report in rows:
                writer.writerow(
                    [a, b, report.mfcc_dtw, report.zcr, report.chroma, report.spectral_contrast]
                )
    except OSError as exc:
        raise FileError(f"{path}: cannot write ({exc})") from None


def cmd_metrics(args, env) -> int:
    cfg = _metric_config(args, env)
    figures_dir = Path(args.figures) if args.figures else None
    if figures_dir is not None:
        from . import figures  # deferred: pulls in matplotlib

        figures_dir.mkdir(parents=True, exist_ok=True)

    if args.manifest:
        if args.a or args.b:
            raise ValidationError("give either two WAV paths or --manifest, not both")
        rows = []
        for a, b in _read_pair_manifest(args.manifest):
            report = compare(sio.load_metric_audio(a), sio.load_metric_audio(b), cfg)
            rows.append((str(a), str(b), report))
            print(f"{a} vs {b}: {_summary_line(report)}")
        sio.write_json(
            [sio.report_document(r, pair=(a, b), params=config_dict(cfg)) for a, b, r in rows],
            args.output,
        )
        csv_path = args.csv or Path(args.output).with_suffix(".csv")
        _write_csv(rows, csv_path)
        log.info("metrics: %d pair(s) -> %s, %s", len(rows), args.output, csv_path)
        if figures_dir is not None:
            for index, (a, b, report) in enumerate(rows):
                figures.save_figure(
                    figures.similarity_figure(report, title=f"{Path(a).name} vs {Path(b).name}"),
                    figures_dir / f"pair_{index:03d}.png",
                )
            figures.save_figure(
                figures.batch_figure([r for _, _, r in rows],
                                     [f"{Path(a).name}|{Path(b).name}" for a, b, _ in rows]),
                figures_dir / "summary.png",
            )
        return EXIT_OK

    if not (args.a and args.b):
        raise ValidationError("metrics needs two WAV paths (or --manifest)")
    report = compare(sio.load_metric_audio(args.a), sio.load_metric_audio(args.b), cfg)
    sio.write_report_json(report, args.output, pair=(args.a, args.b), params=config_dict(cfg))
    print(_summary_line(report))
    if figures_dir is not None:
        figures.save_figure(
            figures.similarity_figure(report, title=f"{Path(args.a).name} vs {Path(args.b).name}"),
            figures_dir / (Path(args.output).stem + ".png"),
        )
    return EXIT_OK


def _run_generator(template: str, label: str, out_path: Path):
    """Invoke an external clip generator with {label}/{out} substituted."""
    if "{out}" not in template:
        raise ValidationError("--generate template must reference {out}")
    command = [
        token.replace("{label}", label).replace("{out}", str(out_path))
        for token in shlex.split(template)
    ]
    try:
        proc = subprocess.run(command, capture_output=True, text=True)
    except OSError as exc:
        raise FileError(f"generator failed to start: {exc}") from None
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
        raise FileError(f"generator for label {label} exited {proc.returncode}: {tail}")
    if not out_path.is_file():
        raise FileError(f"generator for label {label} produced no file at {out_path}")


def _clip_assignments(args, labels) -> dict[str, str]:
    clips: dict[str, str] = {}
    if args.clips:
        manifest_path = Path(args.clips)
        doc = sio.read_json(manifest_path)
        if not isinstance(doc, dict):
            raise ValidationError(f"{manifest_path}: clip manifest must map labels to WAV paths")
        for label, value in doc.items():
            if not isinstance(value, str) or not value:
                raise ValidationError(f"{manifest_path}: clip for label {label!r} must be a path")
            target = Path(value)
            if not target.is_absolute():
                target = manifest_path.parent / value
            clips[str(label)] = str(target)
    if args.generate:
        gen_dir = Path(args.output).parent / (Path(args.output).stem + "_clips")
        gen_dir.mkdir(parents=True, exist_ok=True)
        for label in labels:
            if label in clips:
                continue
            target = gen_dir / f"label{label}.wav"
            _run_generator(args.generate, label, target)
            clips[label] = str(target)
            log.info("pipeline: generated clip for label %s", label)
    return clips


def cmd_pipeline(args, env) -> int:
    if not args.clips and not args.generate:
        raise ValidationError("pipeline needs --clips and/or --generate")
    mask = sio.load_mask(args.mask)
    depth = sio.load_depth(args.depth)
    mapping = _mapping_config(args, env)
    regions = detect_regions(mask, depth, min_area_frac=_min_area(args, env))
    regions_doc = sio.regions_document(regions, (mask.width, mask.height), mapping)

    out = Path(args.output)
    regions_path = Path(args.regions_out) if args.regions_out else out.with_suffix(".regions.json")
    sio.write_json(regions_doc, regions_path)

    labels = list(dict.fromkeys(str(region.id) for region in regions))
    clips = _clip_assignments(args, labels)
    render_block = {
        **_checked_block(env.get("render", {}), RenderParams, "config.render"),
        **_config_overrides(args, "render", RenderParams),
    }
    scene_doc = sio.scene_from_regions(regions_doc, clips, render_block)
    scene_path = Path(args.scene_out) if args.scene_out else out.with_suffix(".scene.json")
    sio.write_json(scene_doc, scene_path)

    scene = sio.load_scene(scene_path)
    audio = _render_scene(scene)
    sio.write_multichannel_wav(audio, out, scene.render.output_format)
    log.info(
        "pipeline: %d region(s), %d placed -> %s + %s + %s",
        len(regions), len(scene.regions), out, regions_path, scene_path,
    )
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneaudio",
        description="Scene-driven 5.1 surround rendering and audio similarity metrics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0,
        help="log to stderr; repeat for debug output",
    )
    # Accept -v after the subcommand too. SUPPRESS keeps the subparser from
    # clobbering a count already parsed at the top level.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-v", "--verbose", action="count", default=argparse.SUPPRESS,
        help=argparse.SUPPRESS,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    geometry = sub.add_parser("geometry", parents=[common],
                              help="detect mask regions and write a regions JSON")
    geometry.add_argument("--mask", required=True, help="label mask PNG")
    geometry.add_argument("--depth", required=True, help="depth map PNG")
    geometry.add_argument("--min-area", "--geometry.min-area", dest="min_area",
                          type=float, default=None, metavar="FRAC",
                          help="drop components smaller than FRAC of the image")
    geometry.add_argument("-o", "--output", required=True, help="regions JSON path")
    _add_config_flags(geometry, "mapping", MappingConfig)
    geometry.set_defaults(func=cmd_geometry)

    renderp = sub.add_parser("render", parents=[common],
                             help="render a scene JSON to a 6-channel WAV")
    renderp.add_argument("scene", help="scene JSON path")
    renderp.add_argument("-o", "--output", required=True, help="output WAV path")
    _add_config_flags(renderp, "render", RenderParams)
    _add_config_flags(renderp, "mapping", MappingConfig)
    renderp.set_defaults(func=cmd_render)

    metrics = sub.add_parser("metrics", parents=[common],
                             help="score the similarity of audio pairs")
    metrics.add_argument("a", nargs="?", help="first WAV")
    metrics.add_argument("b", nargs="?", help="second WAV")
    metrics.add_argument("--manifest", help="text file of `a, b` path pairs, one per line")
    metrics.add_argument("-o", "--output", required=True, help="report JSON path")
    metrics.add_argument("--csv", help="CSV summary path (batch; default: output with .csv)")
    metrics.add_argument("--figures", metavar="DIR", help="also render figure PNGs into DIR")
    _add_config_flags(metrics, "metrics", MetricConfig)
    metrics.set_defaults(func=cmd_metrics)

    pipeline = sub.add_parser("pipeline", parents=[common],
                              help="geometry + clip assignment + render, end to end")
    pipeline.add_argument("--mask", required=True, help="label mask PNG")
    pipeline.add_argument("--depth", required=True, help="depth map PNG")
    pipeline.add_argument("--clips", help="JSON manifest mapping labels to WAV paths")
    pipeline.add_argument("--generate", metavar="CMD",
                          help="command template creating a clip per label; "
                               "{label} and {out} are substituted")
    pipeline.add_argument("--min-area", "--geometry.min-area", dest="min_area",
                          type=float, default=None, metavar="FRAC")
    pipeline.add_argument("-o", "--output", required=True, help="output WAV path")
    pipeline.add_argument("--regions-out", help="regions JSON path (default: output with .regions.json)")
    pipeline.add_argument("--scene-out", help="scene JSON path (default: output with .scene.json)")
    _add_config_flags(pipeline, "render", RenderParams)
    _add_config_flags(pipeline, "mapping", MappingConfig)
    pipeline.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True
    )
    try:
        env = _env_defaults()
        return args.func(args, env)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except FileError as exc:
        log.error("%s", exc)
        return EXIT_FILE
    except SceneAudioError as exc:
        log.error("%s", exc)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        if args.verbose:
            log.exception("internal error")
        else:
            log.error("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
