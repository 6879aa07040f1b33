"""Command-line interface.

Exit status: 0 on success, 1 when arguments or inputs fail validation, 2 when
a run fails after validation. Outputs are written only after all validation
passes, and each output file appears atomically.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import experiments, pipeline, scanner, svm
from .distance import REGISTRY
from .pipeline import ModelFormatError
from .waveform_io import Preprocessing, WFSFormatError, load_dataset

log = logging.getLogger("fastmapsvm")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {s}")
    return v


def _nonneg_float(s: str) -> float:
    v = float(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {s}")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {s}")
    return v


def _band(s: str):
    if s.strip() == "":
        return None
    try:
        lo, hi = (float(x) for x in s.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH in Hz, got {s!r}") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError(f"need 0 < LOW < HIGH, got {s!r}")
    return (lo, hi)


def _float_list(s: str) -> tuple:
    try:
        vals = tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive values, got {s!r}")
    return vals


def _gamma_list(s: str) -> tuple:
    out = []
    for x in s.split(","):
        x = x.strip()
        if not x:
            continue
        if x == "scale":
            out.append("scale")
            continue
        try:
            v = float(x)
        except ValueError:
            raise argparse.ArgumentTypeError(f"gamma must be 'scale' or a number, got {x!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"gamma must be positive, got {x!r}")
        out.append(v)
    if not out:
        raise argparse.ArgumentTypeError("empty gamma grid")
    return tuple(out)


def _int_list(s: str) -> tuple:
    try:
        vals = tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {s!r}")
    return vals


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, model_flags: bool):
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default: %(default)s)")
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="worker threads for distance evaluation (default: %(default)s)")
    if model_flags:
        p.add_argument("--distance", choices=sorted(REGISTRY), default="ncc",
                       help="distance function (default: %(default)s)")
        p.add_argument("--ndim", type=_positive_int, default=8,
                       help="embedding dimension K (default: %(default)s)")
        p.add_argument("--band", type=_band, default=(1.0, 20.0), metavar="LOW:HIGH",
                       help="bandpass corners in Hz; empty string disables filtering (default: 1:20)")
        p.add_argument("--poles", type=_positive_int, default=4,
                       help="Butterworth pole count, even (default: %(default)s)")
        p.add_argument("--grid-c", type=_float_list, default=svm.DEFAULT_C_GRID, metavar="C1,C2,...",
                       help="SVM C grid (default: 0.1,1,10,100)")
        p.add_argument("--grid-gamma", type=_gamma_list, default=svm.DEFAULT_GAMMA_GRID,
                       metavar="G1,G2,...", help="rbf gamma grid, 'scale' allowed (default: scale,0.01,0.1,1)")
        p.add_argument("--folds", type=_positive_int, default=5,
                       help="cross-validation folds (default: %(default)s)")
        p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf",
                       help="SVM kernel (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fastmapsvm", description="FastMap embedding + SVM classification of waveforms")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", help="train a model on a WFS dataset")
    p.add_argument("--data", required=True, help="training WFS directory")
    p.add_argument("--out", required=True, help="output model directory")
    _add_common(p, model_flags=True)

    p = sub.add_parser("predict", help="score every item of a WFS dataset")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--data", required=True, help="WFS directory to score")
    p.add_argument("--out", required=True, help="output CSV: id,label,score")
    _add_common(p, model_flags=False)

    p = sub.add_parser("embed", help="export scaled embedding coordinates")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--data", required=True, help="WFS directory to embed")
    p.add_argument("--out", required=True, help="output CSV: id,label,c1..cK")
    p.add_argument("--grid", type=int, default=0,
                   help="also write the SVM decision value on an NxN grid over the first two "
                        "scaled dimensions; 0 disables (default: %(default)s)")
    p.add_argument("--grid-out", default=None,
                   help="decision-surface CSV path (default: OUT with suffix _grid.csv)")
    _add_common(p, model_flags=False)

    p = sub.add_parser("scan", help="sliding-window detection on a continuous stream")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--stream", required=True, help="single-item WFS directory holding the stream")
    p.add_argument("--window-s", type=_positive_float, default=scanner.DEFAULT_WINDOW_S,
                   help="window length in seconds (default: %(default)s)")
    p.add_argument("--stride-s", type=_positive_float, default=scanner.DEFAULT_STRIDE_S,
                   help="window stride in seconds (default: %(default)s)")
    p.add_argument("--threshold", type=float, default=0.0,
                   help="decision score a window must exceed (default: %(default)s)")
    p.add_argument("--out", required=True, help="output CSV: start_s,end_s,score,window_count")
    p.add_argument("--windows-out", default=None,
                   help="optional CSV of every window score: start_s,end_s,score")
    _add_common(p, model_flags=False)

    p = sub.add_parser("eval-noise", help="noise-robustness table for a trained model")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--data", required=True, help="test WFS directory")
    p.add_argument("--out", required=True, help="output metrics CSV")
    p.add_argument("--sigma-max", type=_nonneg_float, default=6.0,
                   help="largest noise level (default: %(default)s)")
    p.add_argument("--sigma-step", type=_positive_float, default=0.5,
                   help="noise level increment (default: %(default)s)")
    p.add_argument("--shift-s", type=_nonneg_float, default=2.0,
                   help="random circular shift drawn from [-S, S] seconds (default: %(default)s)")
    _add_common(p, model_flags=False)

    p = sub.add_parser("eval-sweep", help="training-size or dimension sensitivity table")
    p.add_argument("--data", required=True, help="WFS directory to split into train pool and test set")
    p.add_argument("--out", required=True, help="output metrics CSV")
    p.add_argument("--axis", choices=("train_size", "K"), required=True, help="swept quantity")
    p.add_argument("--values", type=_int_list, required=True, metavar="V1,V2,...",
                   help="ascending sweep values")
    p.add_argument("--test-per-class", type=_positive_int, default=None,
                   help="held-out items per class (default: half the smaller class)")
    _add_common(p, model_flags=True)
    return parser


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def _check_input_dir(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{what} not found: {path}")
    return p


def _check_output(path: str, inputs=()) -> Path:
    p = Path(path)
    for i in inputs:
        if p.resolve() == Path(i).resolve():
            raise UsageError(f"output {path} would overwrite an input")
    if p.exists() and p.is_dir() and p.suffix == ".csv":
        raise UsageError(f"output {path} is a directory")
    return p


def _load_model(path: str) -> pipeline.FastMapSVMModel:
    try:
        return pipeline.load_model(_check_input_dir(path, "model directory"))
    except ModelFormatError as exc:
        raise UsageError(f"cannot load model {path}: {exc}") from None


def _load_data(path: str):
    try:
        return load_dataset(_check_input_dir(path, "dataset directory"))
    except WFSFormatError as exc:
        raise UsageError(f"cannot load dataset {path}: {exc}") from None


def _check_modality(model, ds) -> None:
    if len(ds) and (ds.n_channels != model.n_channels or ds.sample_rate_hz != model.sample_rate_hz):
        raise UsageError(
            f"dataset has {ds.n_channels} channels at {ds.sample_rate_hz} Hz; model expects "
            f"{model.n_channels} channels at {model.sample_rate_hz} Hz"
        )


def _config_from_args(args) -> pipeline.PipelineConfig:
    if args.poles % 2:
        raise UsageError("--poles must be even")
    if args.distance == "edit":
        raise UsageError("edit distance applies to strings, not waveforms")
    return pipeline.PipelineConfig(
        ndim=args.ndim,
        seed=args.seed,
        distance_name=args.distance,
        preprocessing=Preprocessing(args.band, args.poles, True),
        C_grid=args.grid_c,
        gamma_grid=args.grid_gamma,
        folds=args.folds,
        kernel=args.kernel,
        jobs=args.jobs,
    )


def _check_band(config: pipeline.PipelineConfig, sample_rate_hz: float) -> None:
    try:
        config.preprocessing.design(sample_rate_hz)
    except ValueError as exc:
        raise UsageError(f"invalid filter: {exc}") from None


# ---------------------------------------------------------------------------
# commands: each validates fully, then returns a thunk doing the work
# ---------------------------------------------------------------------------

def _cmd_train(args):
    config = _config_from_args(args)
    ds = _load_data(args.data)
    out = _check_output(args.out, [args.data])
    _check_band(config, ds.sample_rate_hz)

    def work():
        model = pipeline.fit(ds, config)
        pipeline.save_model(model, out)
        print(f"trained on {len(ds)} items; model written to {out}")

    return work


def _cmd_predict(args):
    model = _load_model(args.model)
    ds = _load_data(args.data)
    _check_modality(model, ds)
    out = _check_output(args.out, [args.model, args.data])

    def work():
        preds = pipeline.predict(model, ds.waveforms, jobs=args.jobs)
        rows = [[w.id, label, _num(score)] for w, (label, score) in zip(ds.waveforms, preds)]
        _atomic_write_text(out, _csv_text(["id", "label", "score"], rows))

    return work


def _cmd_embed(args):
    model = _load_model(args.model)
    ds = _load_data(args.data)
    _check_modality(model, ds)
    out = _check_output(args.out, [args.model, args.data])
    if args.grid < 0:
        raise UsageError("--grid must be >= 0")
    if args.grid == 1:
        raise UsageError("--grid needs at least 2 points per axis")
    if args.grid and model.ndim < 2:
        raise UsageError("--grid needs a model with at least 2 dimensions")
    grid_out = None
    if args.grid:
        grid_out = _check_output(args.grid_out or str(out.with_name(out.stem + "_grid.csv")),
                                 [args.model, args.data, args.out])

    def work():
        X = model.transform(ds.waveforms, jobs=args.jobs)
        header = ["id", "label"] + [f"c{k + 1}" for k in range(model.ndim)]
        rows = [[w.id, int(lab)] + [_num(v) for v in x] for w, lab, x in zip(ds.waveforms, ds.labels, X)]
        texts = [(out, _csv_text(header, rows))]
        if grid_out is not None:
            texts.append((grid_out, _decision_surface_csv(model, X, args.grid)))
        for path, text in texts:
            _atomic_write_text(path, text)

    return work


def _decision_surface_csv(model, X, n: int) -> str:
    """Decision values on an n x n grid over scaled dims 1-2, other dims at 0 (the training mean)."""
    if len(X):
        lo, hi = X[:, :2].min(axis=0), X[:, :2].max(axis=0)
    else:
        lo, hi = np.full(2, -3.0), np.full(2, 3.0)
    pad = 0.1 * np.maximum(hi - lo, 1e-9)
    g1 = np.linspace(lo[0] - pad[0], hi[0] + pad[0], n)
    g2 = np.linspace(lo[1] - pad[1], hi[1] + pad[1], n)
    pts = np.zeros((n * n, model.ndim))
    pts[:, 0] = np.repeat(g1, n)
    pts[:, 1] = np.tile(g2, n)
    vals = svm.decision_function(model.svm, pts)
    rows = [[_num(a), _num(b), _num(v)] for (a, b), v in zip(pts[:, :2], vals)]
    return _csv_text(["c1", "c2", "decision"], rows)


def _cmd_scan(args):
    model = _load_model(args.model)
    ds = _load_data(args.stream)
    if len(ds) != 1:
        raise UsageError(f"--stream must hold exactly one item, found {len(ds)}")
    _check_modality(model, ds)
    stream = ds.waveforms[0]
    if args.window_s > stream.duration_s:
        raise UsageError(f"--window-s {args.window_s} exceeds stream duration {stream.duration_s} s")
    out = _check_output(args.out, [args.model, args.stream])
    wout = _check_output(args.windows_out, [args.model, args.stream, args.out]) if args.windows_out else None

    def work():
        ws = scanner.score_windows(model, stream, args.window_s, args.stride_s, args.jobs)
        dets = scanner.detect(ws, args.threshold, args.stride_s)
        raw = sum(1 for w in ws if w.score > args.threshold and w.score > 0)
        texts = [(out, _csv_text(
            ["start_s", "end_s", "score", "window_count"],
            [[_num(d.start_s), _num(d.end_s), _num(d.score), d.window_count] for d in dets],
        ))]
        if wout is not None:
            texts.append((wout, _csv_text(
                ["start_s", "end_s", "score"],
                [[_num(w.start_s), _num(w.end_s), _num(w.score)] for w in ws],
            )))
        for path, text in texts:
            _atomic_write_text(path, text)
        print(f"{len(ws)} windows scored; {raw} windows above threshold; {len(dets)} merged detections")

    return work


def _rows_csv(rows) -> str:
    body = []
    for r in rows:
        m = r.metrics
        body.append([_num(r.axis_value), _num(m.precision), _num(m.recall), _num(m.f1),
                     _num(m.accuracy), _num(m.balanced_accuracy), _num(r.auc)])
    return _csv_text(experiments.CSV_HEADER, body)


def _cmd_eval_noise(args):
    model = _load_model(args.model)
    ds = _load_data(args.data)
    _check_modality(model, ds)
    out = _check_output(args.out, [args.model, args.data])
    too_long = [w.id for w in ds.waveforms if args.shift_s > w.duration_s]
    if too_long:
        raise UsageError(f"--shift-s exceeds the duration of {len(too_long)} items")

    def work():
        rows = experiments.noise_robustness_experiment(
            model, ds, args.sigma_max, args.sigma_step, (-args.shift_s, args.shift_s),
            seed=args.seed, jobs=args.jobs,
        )
        _atomic_write_text(out, _rows_csv(rows))

    return work


def _cmd_eval_sweep(args):
    config = _config_from_args(args)
    ds = _load_data(args.data)
    out = _check_output(args.out, [args.data])
    _check_band(config, ds.sample_rate_hz)
    if list(args.values) != sorted(args.values):
        raise UsageError("--values must be ascending")

    def work():
        rows = experiments.sensitivity_sweep(
            ds, config, args.axis, args.values, seed=args.seed,
            test_per_class=args.test_per_class, jobs=args.jobs,
        )
        _atomic_write_text(out, _rows_csv(rows))

    return work


COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
    "embed": _cmd_embed,
    "scan": _cmd_scan,
    "eval-noise": _cmd_eval_noise,
    "eval-sweep": _cmd_eval_sweep,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        work = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        work()
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("run failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
