"""Command-line surface: convert, batch, eval, synth, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evalx, netlist, pipeline, raster, synth
from .config import Config, ConfigError, load_config

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGS = 2


def _json_bytes(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--connectivity", type=int)
    sub.add_argument("--gap-radius", type=int, dest="gap_radius")
    sub.add_argument("--dilation", type=int)
    sub.add_argument("--min-area", type=int, dest="min_area")
    sub.add_argument("--band", type=int)
    sub.add_argument("--max-bind-distance", type=float, dest="max_bind_distance")
    sub.add_argument("--iou-threshold", type=float, dest="iou_threshold")
    sub.add_argument("--assist-url", dest="assist_url")
    sub.add_argument("--assist-timeout", type=float, dest="assist_timeout")


def _build_config(args) -> Config:
    cfg = Config()
    if args.config:
        cfg = load_config(args.config, cfg)
    updates = {
        key: getattr(args, key)
        for key in cfg.as_dict()
        if getattr(args, key, None) is not None
    }
    return cfg.replace(**updates)


def _assist_client(cfg: Config):
    if not cfg.assist_url:
        return None
    from .assist import AssistClient

    return AssistClient(url=cfg.assist_url, timeout=cfg.assist_timeout)


def _read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _convert_one(image_path: Path, out_base: Path, cfg: Config, *,
                 detections=None, ocr=None, force=False, dump_stages=(),
                 assist_client=None, overrides=None) -> pipeline.ConvertResult:
    payload = image_path.read_bytes()
    result = pipeline.convert_bytes(
        payload, cfg=cfg, detections_doc=detections, ocr_doc=ocr,
        force=force, assist_client=assist_client,
        overrides=overrides or (),
    )
    out_base.parent.mkdir(parents=True, exist_ok=True)
    if result.netlist_text is not None:
        Path(str(out_base) + ".cir").write_bytes(result.netlist_text.encode("utf-8"))
    Path(str(out_base) + ".flags.json").write_bytes(_json_bytes(result.flags_doc()))
    for stage in dump_stages:
        doc = pipeline.stage_doc(result, stage)
        if isinstance(doc, bytes):
            Path(f"{out_base}.{stage}.pgm").write_bytes(doc)
        else:
            Path(f"{out_base}.{stage}.json").write_bytes(_json_bytes(doc))
    return result


def cmd_convert(args) -> int:
    cfg = _build_config(args)
    image_path = Path(args.image)
    if not image_path.is_file():
        print(f"error: no such image: {image_path}", file=sys.stderr)
        return EXIT_ERROR
    out_base = Path(args.out) if args.out else image_path.with_suffix("")
    detections = _read_json(args.detections) if args.detections else None
    ocr = _read_json(args.ocr) if args.ocr else None
    overrides = None
    if args.overrides:
        try:
            overrides = pipeline.parse_overrides(_read_json(args.overrides))
        except (pipeline.OverrideError, ValueError) as exc:
            print(f"error: bad overrides file: {exc}", file=sys.stderr)
            return EXIT_ERROR
    result = _convert_one(
        image_path, out_base, cfg,
        detections=detections, ocr=ocr, force=args.force,
        dump_stages=args.dump_stage or (), assist_client=_assist_client(cfg),
        overrides=overrides,
    )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    unresolved = result.unresolved_flags()
    for f in unresolved:
        print(f"flag: {f.kind.value}: {f.detail}", file=sys.stderr)
    return EXIT_FLAGS if unresolved else EXIT_OK


def _corpus_images(corpus: Path) -> list[tuple[str, Path]]:
    jobs = []
    for sub in sorted(corpus.iterdir()):
        if sub.is_dir() and (sub / "image.pgm").is_file():
            jobs.append((sub.name, sub / "image.pgm"))
        elif sub.suffix in (".pgm", ".png") and sub.is_file():
            jobs.append((sub.stem, sub))
    return jobs


def _batch_one(task):
    name, image_path, out_dir, cfg_dict, force = task
    cfg = Config(**cfg_dict)
    job_dir = image_path.parent
    detections = None
    ocr = None
    # external docs sitting beside the image are used when present
    if (job_dir / "detections.json").is_file() and image_path.name != "image.pgm":
        detections = _read_json(str(job_dir / "detections.json"))
    result = _convert_one(
        image_path, Path(out_dir) / name / "out", cfg,
        detections=detections, ocr=ocr, force=force,
        dump_stages=("detections",),
    )
    return name, result.status(), len(result.flags)


def cmd_batch(args) -> int:
    cfg = _build_config(args)
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        print(f"error: no such corpus dir: {corpus}", file=sys.stderr)
        return EXIT_ERROR
    jobs = _corpus_images(corpus)
    if not jobs:
        print(f"error: no images found in {corpus}", file=sys.stderr)
        return EXIT_ERROR
    out_dir = Path(args.out)
    tasks = [(name, path, out_dir, cfg.as_dict(), args.force)
             for name, path in jobs]
    if args.jobs > 1:
        from multiprocessing import Pool

        with Pool(args.jobs) as pool:
            rows = pool.map(_batch_one, tasks)
    else:
        rows = [_batch_one(t) for t in tasks]
    rows.sort()
    summary = {
        "jobs": [{"name": n, "status": s, "flags": k} for n, s, k in rows],
        "total": len(rows),
        "complete": sum(1 for _, s, _ in rows if s == "complete"),
        "flagged": sum(1 for _, s, _ in rows if s == "flagged"),
        "config": cfg.as_dict(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "summary.json").write_bytes(_json_bytes(summary))
    print(f"{summary['complete']}/{summary['total']} complete, "
          f"{summary['flagged']} flagged")
    return EXIT_OK if summary["flagged"] == 0 else EXIT_FLAGS


def cmd_eval(args) -> int:
    cfg = _build_config(args)
    corpus = Path(args.corpus)
    pred = Path(args.predictions)
    if not corpus.is_dir() or not pred.is_dir():
        print("error: corpus and predictions must be directories", file=sys.stderr)
        return EXIT_ERROR
    from .detect import ingest_detections

    matches = []
    rows = []
    for sub in sorted(corpus.iterdir()):
        if not (sub.is_dir() and (sub / "golden.cir").is_file()):
            continue
        name = sub.name
        golden = netlist.parse_netlist((sub / "golden.cir").read_text())
        gold_doc = _read_json(str(sub / "detections.json"))
        dims = (gold_doc["image"]["width"], gold_doc["image"]["height"])
        gold_comps = ingest_detections(gold_doc, dims)
        pdir = pred / name
        pred_doc_path = pdir / "out.detections.json"
        pred_comps = []
        if pred_doc_path.is_file():
            pred_comps = ingest_detections(_read_json(str(pred_doc_path)), dims)
        matches.append(evalx.match_detections(pred_comps, gold_comps,
                                              cfg.iou_threshold))
        generated = None
        cir = pdir / "out.cir"
        if cir.is_file():
            generated = netlist.parse_netlist(cir.read_text())
        texts_path = sub / "texts.json"
        golden_texts = None
        if texts_path.is_file():
            golden_texts = [t["string"] for t in _read_json(str(texts_path))["texts"]]
        text_acc, structure, overall = evalx.netlist_scores(
            generated, golden, golden_texts
        )
        rows.append({
            "name": name,
            "text_accuracy": text_acc,
            "structure_accuracy": structure,
            "overall_accuracy": overall,
        })
    if not rows:
        print(f"error: no golden schematics under {corpus}", file=sys.stderr)
        return EXIT_ERROR
    report = evalx.aggregate(matches, rows)
    doc = report.to_json()
    doc["config"] = cfg.as_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_bytes(_json_bytes(doc))
    print(evalx.report_text(report), end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    out = Path(args.out)
    seeds = range(args.seed_start, args.seed_start + args.count)
    degr = None
    if args.scale != 1 or args.brightness or args.flip or args.gaps:
        degr = synth.Degradation(
            scale=args.scale, brightness=args.brightness,
            flip=args.flip, gaps=args.gaps,
        )
    for seed in seeds:
        gs = synth.generate_schematic(seed, args.n_components)
        d = out / str(seed)
        d.mkdir(parents=True, exist_ok=True)
        image = synth.degrade(gs, degr) if degr else gs.image
        (d / "image.pgm").write_bytes(raster.write_pgm(image))
        (d / "detections.json").write_bytes(_json_bytes(gs.detections))
        (d / "texts.json").write_bytes(_json_bytes(gs.texts))
        (d / "golden.cir").write_bytes(gs.netlist_text.encode("utf-8"))
    print(f"wrote {len(list(seeds))} schematics to {out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    cfg = _build_config(args)
    app = create_app(Path(args.jobdir), cfg)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schemnet",
        description="schematic image to SPICE netlist conversion toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("convert", help="convert one schematic image")
    p.add_argument("image")
    p.add_argument("-o", "--out", help="output base path (default: image path)")
    p.add_argument("--detections", help="external detection JSON")
    p.add_argument("--ocr", help="external OCR JSON")
    p.add_argument("--overrides",
                   help="JSON list of review overrides to pre-apply")
    p.add_argument("--force", action="store_true",
                   help="emit the netlist despite unresolved dangling terminals")
    p.add_argument("--dump-stage", action="append",
                   choices=pipeline.STAGES, help="write a stage artifact")
    _add_config_flags(p)
    p.set_defaults(func=cmd_convert)

    p = subs.add_parser("batch", help="convert every image in a corpus dir")
    p.add_argument("corpus")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_batch)

    p = subs.add_parser("eval", help="score predictions against golden data")
    p.add_argument("corpus")
    p.add_argument("predictions")
    p.add_argument("-o", "--out", help="directory for report.json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("synth", help="generate a golden schematic corpus")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--n-components", type=int, default=None)
    p.add_argument("--scale", type=int, default=1, choices=(1, 2))
    p.add_argument("--brightness", type=int, default=0)
    p.add_argument("--flip", action="store_true")
    p.add_argument("--gaps", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("serve", help="serve the review API over a job dir")
    p.add_argument("jobdir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    _add_config_flags(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - uniform CLI error surface
        stage = type(exc).__name__
        print(f"error: {stage}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
