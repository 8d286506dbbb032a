"""usvkit command line: synth, detect, train, evaluate, classify, explain, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .audio_io import CANONICAL_RATE_HZ, load_wav
from .calls import CLASS_LABELS, CallClass
from .detection import DetectionParams, detect_calls, evaluate_detection, extract_snippet
from .estimators import CnnUsvClassifier, FnnUsvClassifier
from .evaluation import cross_validate
from .interpret import activation_maximization, smoothgrad_ig
from .models import CnnArchConfig, FnnArchConfig, save_classifier
from .pipeline import (
    CallRecord,
    Journal,
    LoadedClassifier,
    PipelineConfig,
    PipelineMode,
    TriageStatus,
    export_csv,
    run_pipeline,
)
from .preprocess import CNN_PAD_MS, FNN_PAD_MS
from .rng import Rng
from .synth import SynthCorpusConfig, load_ground_truth, write_corpus

logger = logging.getLogger(__name__)


def _load_recording(path: Path):
    rec = load_wav(path)
    if rec.sample_rate_hz != CANONICAL_RATE_HZ:
        print(
            f"warning: {path.name} has sample rate {rec.sample_rate_hz} Hz; detection "
            f"defaults were tuned for {CANONICAL_RATE_HZ} Hz",
            file=sys.stderr,
        )
    return rec


def _load_labeled_corpus(data_dir: Path, pad_ms: float, limit: int | None = None):
    """Snippets + labels from a corpus directory (WAVs + ground_truth.csv)."""
    truth = load_ground_truth(data_dir / "ground_truth.csv")
    snippets, labels = [], []
    for rec_id in sorted(truth):
        recording = _load_recording(data_dir / f"{rec_id}.wav")
        for event, call_class in truth[rec_id]:
            snippets.append(extract_snippet(recording, event, pad_ms))
            labels.append(call_class)
            if limit is not None and len(snippets) >= limit:
                return snippets, labels
    return snippets, labels


def cmd_synth(args) -> int:
    if args.config:
        config = SynthCorpusConfig.from_json(Path(args.config).read_text())
    elif args.preset == "hard":
        config = SynthCorpusConfig.hard(seed=args.seed)
    else:
        config = SynthCorpusConfig.easy(seed=args.seed)
    paths = write_corpus(config, args.recordings, args.out)
    print(f"wrote {len(paths)} recordings to {args.out}")
    return 0


def cmd_detect(args) -> int:
    params = DetectionParams.from_file(args.config) if args.config else DetectionParams()
    records: list[CallRecord] = []
    all_truth = load_ground_truth(args.truth) if args.truth else None
    totals = {"tp": 0, "truth": 0, "pred": 0}
    for wav in args.wavs:
        recording = _load_recording(Path(wav))
        events = detect_calls(recording, params)
        for i, event in enumerate(events):
            records.append(
                CallRecord(
                    recording_id=recording.id,
                    call_index=i,
                    start_s=event.start_s,
                    end_s=event.end_s,
                    duration_ms=event.duration_ms,
                    predicted_class=None,
                    pseudo_probabilities=None,
                    confidence=None,
                    triage_status=TriageStatus.FLAGGED,
                )
            )
        if all_truth is not None and recording.id in all_truth:
            truth_events = [e for e, _ in all_truth[recording.id]]
            report = evaluate_detection(events, truth_events)
            totals["tp"] += report.true_positives
            totals["truth"] += report.n_truth
            totals["pred"] += report.n_predicted
            print(
                f"{recording.id}: {len(events)} events, recall {report.recall:.3f}, "
                f"precision {report.precision:.3f}"
            )
        else:
            print(f"{recording.id}: {len(events)} events")
    if args.out:
        export_csv(records, args.out)
        print(f"wrote {len(records)} calls to {args.out}")
    if all_truth is not None and totals["truth"]:
        print(
            f"overall: recall {totals['tp'] / totals['truth']:.4f}, "
            f"precision {totals['tp'] / max(totals['pred'], 1):.4f}"
        )
    return 0


def _make_estimator(args):
    if args.arch == "fnn":
        return FnnUsvClassifier(
            learning_rate=args.lr if args.lr else 1e-4,
            epochs=args.epochs,
            batch_size=args.batch_size,
            seed=args.seed,
        )
    return CnnUsvClassifier(
        learning_rate=args.lr if args.lr else 1e-3,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        dtype=args.dtype,
    )


def cmd_train(args) -> int:
    pad = FNN_PAD_MS if args.arch == "fnn" else CNN_PAD_MS
    snippets, labels = _load_labeled_corpus(Path(args.data), pad, args.limit)
    print(f"training {args.arch} on {len(snippets)} calls")
    est = _make_estimator(args)
    start = time.time()
    est.fit(snippets, labels)
    print(f"trained in {time.time() - start:.1f}s; final loss {est.loss_history_[-1]:.4f}")
    if args.arch == "fnn":
        arch = FnnArchConfig(seed=args.seed)
        stats = None
        extra = {"mean_time": float(np.mean([min(s.duration_ms, 150.0) / 150.0 for s in snippets]))}
    else:
        arch = CnnArchConfig(seed=args.seed)
        stats = est.stats_
        extra = {"mean_time": est.mean_time_feature_}
    save_classifier(est.model_, args.out, arch, est.train_config_, stats, extra)
    print(f"saved model to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    pad = FNN_PAD_MS if args.arch == "fnn" else CNN_PAD_MS
    snippets, labels = _load_labeled_corpus(Path(args.data), pad, args.limit)
    data = list(zip(snippets, labels))
    est = _make_estimator(args)

    def build_model():
        return est  # estimator rebuilt per fold via fit

    def train_fn(estimator, items):
        estimator.fit([s for s, _ in items], [y for _, y in items])

    def predict_fn(estimator, items):
        return [CallClass(int(c)) for c in estimator.predict([s for s, _ in items])]

    result = cross_validate(build_model, train_fn, predict_fn, data, [], k=args.cv, seed=args.seed)
    for i, report in enumerate(result.fold_reports):
        print(f"fold {i}: accuracy {report.overall_accuracy:.4f}, weighted F1 {report.weighted_f1:.4f}")
    print(
        f"mean accuracy {result.mean_accuracy:.4f} (std {result.std_accuracy:.4f}), "
        f"mean weighted F1 {result.mean_weighted_f1:.4f}"
    )
    if args.out:
        from .evaluation import metrics_to_csv

        payload = {
            "mean_accuracy": result.mean_accuracy,
            "std_accuracy": result.std_accuracy,
            "mean_weighted_f1": result.mean_weighted_f1,
            "std_weighted_f1": result.std_weighted_f1,
            "folds": [r.to_dict() for r in result.fold_reports],
        }
        out = Path(args.out)
        out.write_text(json.dumps(payload, indent=2))
        metrics_to_csv(result.fold_reports[0], out.with_suffix(".fold0.csv"))
        print(f"wrote report to {args.out}")
    return 0


def cmd_classify(args) -> int:
    config = PipelineConfig(
        detection=DetectionParams.from_file(args.config) if args.config else DetectionParams(),
        model_path=args.model,
        triage_threshold=args.threshold,
        mode=PipelineMode.FULLY_AUTOMATED if args.mode == "full" else PipelineMode.SEMI_AUTOMATED,
    )
    data = Path(args.data)
    wavs = sorted(data.glob("*.wav")) if data.is_dir() else [data]
    recordings = [_load_recording(p) for p in wavs]
    records, errors = run_pipeline(recordings, config)
    for rec_id, message in errors.items():
        print(f"error on {rec_id}: {message}", file=sys.stderr)
    export_csv(records, args.out)
    flagged = sum(1 for r in records if r.triage_status is TriageStatus.FLAGGED)
    print(f"wrote {len(records)} calls ({flagged} flagged) to {args.out}")
    if args.journal:
        Journal(args.journal).add_records(records)
        print(f"journaled to {args.journal}")
    return 0


def _save_heatmap(values: np.ndarray, path: Path) -> None:
    """Diverging blue-white-red heatmap PNG, frequency rows bottom-up."""
    from PIL import Image

    values = np.atleast_2d(values)
    peak = float(np.max(np.abs(values))) or 1.0
    norm = values / peak
    rgb = np.zeros(values.shape + (3,), dtype=np.uint8)
    pos = np.clip(norm, 0, 1)
    neg = np.clip(-norm, 0, 1)
    rgb[..., 0] = (255 * (1 - neg)).astype(np.uint8)
    rgb[..., 1] = (255 * (1 - np.abs(norm))).astype(np.uint8)
    rgb[..., 2] = (255 * (1 - pos)).astype(np.uint8)
    Image.fromarray(rgb[::-1]).save(path)


def cmd_explain(args) -> int:
    classifier = LoadedClassifier.from_file(args.model)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.op == "ig":
        if not args.wav:
            print("--wav is required for --op ig", file=sys.stderr)
            return 2
        recording = _load_recording(Path(args.wav))
        events = detect_calls(recording)
        if not events:
            print("no calls detected", file=sys.stderr)
            return 1
        index = min(args.call_index, len(events) - 1)
        snippet = extract_snippet(recording, events[index], classifier.snippet_pad_ms)
        x = classifier.preprocess(snippet)
        pred = classifier.predict([snippet])[0]
        target = int(pred.predicted_class) if args.target_class is None else args.target_class
        saliency = smoothgrad_ig(
            classifier.model,
            x,
            target,
            n_samples=args.smoothgrad_samples,
            noise_std=args.noise_std,
            steps=args.steps,
            rng=Rng(args.seed),
        )
        base = out_dir / f"{recording.id}_call{index}_class{target}"
        heat = saliency.db_channel
        if heat.ndim == 1:
            heat = heat[:384].reshape(48, 8)  # flattened-input model: fold back to freq x time
        _save_heatmap(heat, base.with_suffix(".png"))
        base.with_suffix(".json").write_text(
            json.dumps(
                {
                    "recording_id": recording.id,
                    "call_index": index,
                    "target_class": CLASS_LABELS[CallClass(target)],
                    "predicted_class": CLASS_LABELS[pred.predicted_class],
                    "confidence": pred.confidence,
                    "attributions_db_channel": saliency.db_channel.tolist(),
                }
            )
        )
        print(f"wrote {base}.png and {base}.json")
        return 0

    # channel visualization
    mean_time = classifier.extra.get("mean_time", 0.3)
    input_shape = (3, 201, 170) if classifier.arch_kind == "cnn" else (385,)
    fixed = {2: mean_time} if classifier.arch_kind == "cnn" else None
    viz = activation_maximization(
        classifier.model,
        layer_index=args.layer,
        channel=args.channel,
        n_iters=args.iters,
        rng=Rng(args.seed),
        input_shape=input_shape,
        fixed_channels=fixed,
    )
    base = out_dir / f"layer{args.layer}_channel{args.channel}"
    if viz.synthesized.ndim == 3:
        _save_heatmap(viz.synthesized[1], base.with_suffix(".png"))
    base.with_suffix(".json").write_text(
        json.dumps(
            {
                "layer_index": viz.layer_index,
                "channel": viz.channel,
                "activation_trace": viz.activation_trace.tolist(),
                "synthesized": viz.synthesized.tolist(),
            }
        )
    )
    print(f"wrote {base}.json (final activation {viz.activation_trace[-1]:.4f})")
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    config = ServiceConfig(
        data_dir=Path(args.data),
        journal_path=Path(args.journal),
        model_path=Path(args.model) if args.model else None,
        analyze_on_start=not args.no_analyze,
    )
    serve(config, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="usvkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a ground-truthed synthetic corpus")
    p.add_argument("--config", help="corpus config JSON")
    p.add_argument("--preset", choices=["easy", "hard"], default="easy")
    p.add_argument("--recordings", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="detect calls in WAV recordings")
    p.add_argument("wavs", nargs="+")
    p.add_argument("--config", help="detection parameter JSON")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--truth", help="ground-truth CSV for evaluation")
    p.set_defaults(func=cmd_detect)

    for name, handler in (("train", cmd_train), ("evaluate", cmd_evaluate)):
        p = sub.add_parser(name, help=f"{name} a classifier on a labeled corpus")
        p.add_argument("--arch", choices=["fnn", "cnn"], required=True)
        p.add_argument("--data", required=True, help="corpus dir with ground_truth.csv")
        p.add_argument("--epochs", type=int, default=10)
        p.add_argument("--batch-size", type=int, default=16)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dtype", default="float32")
        p.add_argument("--limit", type=int, default=None)
        if name == "train":
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--cv", type=int, default=10)
            p.add_argument("--out", default=None)
        p.set_defaults(func=handler)

    p = sub.add_parser("classify", help="run the full pipeline on recordings")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="WAV file or directory")
    p.add_argument("--config", help="detection parameter JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--mode", choices=["semi", "full"], default="semi")
    p.add_argument("--journal", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("explain", help="saliency maps and channel visualizations")
    p.add_argument("--op", choices=["ig", "channel"], required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--wav")
    p.add_argument("--call-index", type=int, default=0)
    p.add_argument("--target-class", type=int, default=None)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--smoothgrad-samples", type=int, default=5)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--iters", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--data", required=True)
    p.add_argument("--journal", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--no-analyze", action="store_true")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
