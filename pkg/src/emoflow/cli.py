"""Command-line interface: train, generate, evaluate, convert, serve.

Every verb exits 0 on success; failures print one machine-readable JSON
line (``{"error": ...}``) to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import emotion, evaluation, pipeline, score_io, trainer
from .rules import TranspositionPolicy, decisions_to_json
from .vamodel import load_checkpoint, save_checkpoint


def _load_curves(path: Path) -> tuple[emotion.EmotionCurve, emotion.EmotionCurve]:
    obj = json.loads(Path(path).read_text())
    def curve(payload, kind):
        if isinstance(payload, dict) and "samples" in payload:
            return emotion.EmotionCurve(payload.get("kind", kind),
                                        [tuple(s) for s in payload["samples"]],
                                        int(payload["horizon"]))
        raise ValueError(f"curve JSON for {kind} must carry kind/horizon/samples")
    return curve(obj["valence"], "valence"), curve(obj["arousal"], "arousal")


def _cmd_train(args) -> int:
    cfg = trainer.TrainingConfig(
        batch_size=args.batch_size, epochs=args.epochs, lr=args.lr,
        lr_decay=args.lr_decay, lr_floor=args.lr_floor,
        tf_ratio_pianotree=args.tf_pianotree, tf_ratio_valence=args.tf_valence,
        seed=args.seed, max_steps=args.max_steps)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        cfg = trainer.TrainingConfig(**{**asdict(cfg), **overrides})
    split = trainer.prepare_splits(args.corpus, seed=cfg.seed)
    result = trainer.train(split, cfg, out_dir=args.out)
    final = save_checkpoint(result.model, Path(args.out) / "checkpoint_final.zip",
                            version=f"seed{cfg.seed}-epochs{cfg.epochs}")
    print(json.dumps({
        "checkpoint": str(final),
        "steps": len(result.history),
        "final_loss": result.history[-1].loss.total if result.history else None,
        "aborted": result.aborted,
        "train_songs": len(split.train_songs),
        "validation_songs": len(split.validation_songs),
    }))
    return 0


def _load_melody(args) -> score_io.TrackSet:
    ts = score_io.parse_midi(Path(args.melody).read_bytes())
    if args.chords:
        chords = score_io.parse_chord_annotations(
            Path(args.chords).read_text(), tempo_bpm=ts.tempo_bpm,
            total_steps=ts.num_steps)
        ts = score_io.with_chords(ts, chords)
    return ts


def _cmd_generate(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    ts = _load_melody(args)
    valence, arousal = _load_curves(args.curves)
    for curve in (valence, arousal):
        report = emotion.validate_curve(curve)
        if not report.valid:
            raise ValueError(f"{curve.kind} curve rejected: {', '.join(report.reasons)}")
    out = pipeline.generate(model, ts, valence, arousal,
                            temperature=args.temperature, seed=args.seed,
                            apply_rules=not args.no_rules,
                            policy=TranspositionPolicy(min_gain=args.min_gain))
    Path(args.out).write_bytes(score_io.write_midi(out.accompaniment, ts.tempo_bpm))
    report_payload = {
        "accompaniment": str(args.out),
        "model_version": manifest.get("model_version", "unknown"),
        "measured_flow": {
            "valence": json.loads(out.measured_valence.to_json()),
            "arousal": json.loads(out.measured_arousal.to_json()),
        },
        "correlation": (
            {"valence_r": out.correlation.valence_r,
             "arousal_r": out.correlation.arousal_r,
             "valence_basis": out.correlation.valence_basis,
             "arousal_basis": out.correlation.arousal_basis}
            if out.correlation else {"error": out.correlation_error}),
        "transpositions": json.loads(decisions_to_json(out.transpositions)),
    }
    if args.report:
        Path(args.report).write_text(json.dumps(report_payload, indent=2))
    print(json.dumps(report_payload))
    return 0


def _all_notes_roll(ts: score_io.TrackSet) -> score_io.PianoRoll:
    return score_io.merge_rolls(score_io.merge_accompaniment(ts), ts.melody)


def _cmd_evaluate(args) -> int:
    pred_roll = _all_notes_roll(score_io.parse_midi(Path(args.pred).read_bytes()))
    ref_roll = _all_notes_roll(score_io.parse_midi(Path(args.ref).read_bytes()))
    steps = min(pred_roll.num_steps, ref_roll.num_steps)
    spb = pred_roll.steps_per_bar
    steps -= steps % spb
    if steps == 0:
        raise ValueError("rolls share no full bar to compare")
    pred_roll = score_io.PianoRoll(pred_roll.grid[:, :steps], steps_per_bar=spb)
    ref_roll = score_io.PianoRoll(ref_roll.grid[:, :steps], steps_per_bar=spb)
    scores = evaluation.mute_scores(pred_roll, ref_roll)
    payload = {"fs": scores.fs, "fspc": scores.fspc,
               "precision": scores.precision, "recall": scores.recall,
               "vacuous": scores.vacuous}
    if args.report_dir:
        ref_v, ref_a = pipeline.measure_flow(ref_roll)
        pred_v, pred_a = pipeline.measure_flow(pred_roll)
        row = evaluation.EvalRow(
            song=Path(args.pred).stem, mute=scores,
            input_valence=ref_v, input_arousal=ref_a,
            measured_valence=pred_v, measured_arousal=pred_a)
        try:
            row.correlation = evaluation.flow_correlation(ref_v, ref_a, pred_v, pred_a)
        except evaluation.UndefinedCorrelationError as exc:
            row.error = str(exc)
        report = evaluation.aggregate_report([row], args.report_dir,
                                             before_roll=ref_roll, after_roll=pred_roll)
        payload["report"] = {"csv": str(report.csv_path),
                             "figures": [str(p) for p in report.figure_paths]}
    print(json.dumps(payload))
    return 0


def _cmd_convert(args) -> int:
    ts = _load_melody(args)
    if not args.emit_flow:
        raise ValueError("convert currently supports --emit-flow")
    merged = score_io.merge_accompaniment(ts)
    roll = merged if merged.grid.any() else ts.melody
    valence, arousal = pipeline.measure_flow(roll)
    payload = {
        "valence": json.loads(valence.to_json()),
        "arousal": json.loads(arousal.to_json()),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    print(json.dumps(payload))
    return 0


def _cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import ENV_PORT, create_app
    app = create_app(args.checkpoint, max_bars=args.max_bars)
    port = args.port if args.port is not None else int(os.environ.get(ENV_PORT, 8000))
    uvicorn.run(app, host=args.host, port=port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emoflow",
                                     description="emotion-guided accompaniment tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the VAE on a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-decay", type=float, default=0.999)
    p.add_argument("--lr-floor", type=float, default=1e-5)
    p.add_argument("--tf-pianotree", type=float, default=0.6)
    p.add_argument("--tf-valence", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--config", help="JSON file overriding training fields")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("generate", help="generate an accompaniment for a melody")
    p.add_argument("--melody", required=True)
    p.add_argument("--chords")
    p.add_argument("--curves", required=True, help="JSON with valence/arousal curves")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-gain", type=float, default=0.1)
    p.add_argument("--no-rules", action="store_true")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="FS/FSPC between two MIDI files")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--report-dir",
                   help="also emit the correlation table and comparison figures")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("convert", help="measure the emotion flow of a MIDI file")
    p.add_argument("--in", dest="melody", required=True)
    p.add_argument("--chords")
    p.add_argument("--emit-flow", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("serve", help="run the HTTP generation service")
    p.add_argument("--checkpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--max-bars", type=int, default=None)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
