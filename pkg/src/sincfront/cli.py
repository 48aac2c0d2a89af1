"""``sincfront`` command line: train, respond, gradcheck, valley, synth.

Exit codes: 0 success, 1 failed check, 2 invalid input, 3 I/O, 4 numeric.
Errors are reported as one JSON object per line on stderr.
"""

from __future__ import annotations

import os

# BLAS reads these at import time, so they must be set before numpy loads
_threads = os.environ.get("SINCFRONT_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, data, gradcheck, model
from .config import ExperimentConfig
from .conv import frame_signal
from .errors import DomainError, SincFrontError
from .experiments import TaskConfig, make_task

EXIT_IO = 3


# --- helpers ------------------------------------------------------------------

def _prepare_out(out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _noisy(cfg: ExperimentConfig, utts, seed):
    if cfg.noise_snr_db is None:
        return utts
    return [data.inject_band_noise(u, cfg.noise_low_hz, cfg.noise_high_hz, cfg.noise_snr_db, seed=[seed, i])
            for i, u in enumerate(utts)]


def _training_chunks(cfg: ExperimentConfig):
    """(train_chunks, heldout_chunks) for the configured data source."""
    if cfg.manifest is not None:
        utts = _noisy(cfg, data.load_manifest(cfg.manifest, cfg.sample_rate), cfg.seed)
        labels = {u.label for u in utts}
        if max(labels) >= cfg.n_classes or min(labels) < 0:
            raise DomainError(f"manifest labels must lie in [0, {cfg.n_classes})")
        chunks = []
        for u in utts:
            chunks += frame_signal(u.samples, cfg.sample_rate, cfg.chunk_ms, cfg.overlap_ms, u.label, u.id)
        return chunks, []
    task = TaskConfig(cfg.n_classes, cfg.utts_per_class, cfg.heldout_per_class, cfg.duration_s,
                      cfg.sample_rate, cfg.chunk_ms, cfg.overlap_ms)
    profiles = cfg.load_profiles() or data.default_profiles(cfg.n_classes, jitter=cfg.jitter)
    if cfg.noise_snr_db is None:
        return make_task(task, cfg.seed, profiles)
    utts = _noisy(cfg, data.synth_dataset(profiles, cfg.utts_per_class, cfg.duration_s, cfg.sample_rate,
                                          cfg.seed), cfg.seed)
    train, held = [], []
    for u in utts:
        k = int(u.id.split("_u")[1])
        dest = held if k >= cfg.utts_per_class - cfg.heldout_per_class else train
        dest += frame_signal(u.samples, cfg.sample_rate, cfg.chunk_ms, cfg.overlap_ms, u.label, u.id)
    return train, held


# --- commands -----------------------------------------------------------------

def cmd_train(cfg: ExperimentConfig, out_dir) -> int:
    train_chunks, held = _training_chunks(cfg)
    state = model.init_state(cfg.model_config(), cfg.seed)
    opt = model.OptState(**cfg.opt_kwargs())

    def progress(rec, _state):
        extra = "" if rec.heldout_error is None else f" heldout_error={rec.heldout_error:.4f}"
        print(f"epoch {rec.epoch} mean_loss={rec.mean_loss:.6f} chunk_error={rec.chunk_error:.4f}{extra}",
              file=sys.stderr)

    state, trace = model.train(state, opt, train_chunks, cfg.epochs, cfg.seed, eval_set=held or None,
                               on_epoch=progress, micro_batch=cfg.micro_batch)
    out = _prepare_out(out_dir)
    model.save_checkpoint(state, out / "checkpoint.json", extra={"optimizer": cfg.opt_kwargs(),
                                                                 "epochs": cfg.epochs, "seed": cfg.seed})
    model.write_trace_csv(trace, out / "trace.csv")
    (out / "config.json").write_text(cfg.to_json())
    return 0


def cmd_respond(checkpoint_path, grid_size: int, out_dir, min_rel_height: float = 0.1) -> int:
    state = model.load_checkpoint(checkpoint_path)
    L = state.config.filter_length
    if grid_size < 2 * L:
        raise DomainError(f"grid_size {grid_size} below 2L = {2 * L}")
    layer = state.first_layer()
    curves = analysis.filter_responses(layer, grid_size)
    total = analysis.cumulative_response(layer, grid_size)
    out = _prepare_out(out_dir)
    width = max(3, len(str(len(curves) - 1)))
    for i, c in enumerate(curves):
        c.to_csv(out / f"filter_{i:0{width}d}.csv")
    total.to_csv(out / "cumulative.csv")
    analysis.write_peaks_json(total, out / "peaks.json", min_rel_height)
    return 0


def cmd_gradcheck(seed: int = 0, corrupt: bool = False, stream=None) -> int:
    stream = stream or sys.stdout

    def flip_first_layer(grads):
        key = "f1" if "f1" in grads else "taps"
        grads[key].flat[0] = -grads[key].flat[0] if grads[key].flat[0] != 0 else 1.0

    reports = gradcheck.run_gradcheck(seed, flip_first_layer if corrupt else None)
    bad = []
    for rep in reports:
        for g in rep.groups:
            status = "ok" if g.max_rel_error < gradcheck.REL_TOL else "FAIL"
            print(f"{rep.variant}\t{g.name}\tmax_rel_error={g.max_rel_error:.3e}\t{status}", file=stream)
            if status == "FAIL":
                bad.append(f"{rep.variant}.{g.name}")
    if bad:
        print(f"gradient check failed: {', '.join(bad)}", file=stream)
        return 1
    print(f"gradient check passed (threshold {gradcheck.REL_TOL:g})", file=stream)
    return 0


def valley_config(cfg: ExperimentConfig) -> analysis.ValleyConfig:
    return analysis.ValleyConfig(
        model=cfg.model_config(), band_low_hz=cfg.noise_low_hz, band_high_hz=cfg.noise_high_hz,
        snr_db=0.0 if cfg.noise_snr_db is None else cfg.noise_snr_db, flank_hz=cfg.flank_hz,
        grid_size=cfg.grid_size, checkpoint_every=cfg.checkpoint_every, epochs=cfg.epochs,
        n_classes=cfg.n_classes, utts_per_class=cfg.utts_per_class, duration_s=cfg.duration_s,
        chunk_ms=cfg.chunk_ms, overlap_ms=cfg.overlap_ms, opt=cfg.opt_kwargs(),
        profiles=cfg.load_profiles() or data.default_profiles(cfg.n_classes, jitter=cfg.jitter),
    )


def cmd_valley(cfg: ExperimentConfig, out_dir) -> int:
    sinc, learned = analysis.valley_experiment(valley_config(cfg), cfg.seed)
    out = _prepare_out(out_dir)
    sinc.to_csv(out / "valley_sinc.csv")
    learned.to_csv(out / "valley_learned.csv")
    (out / "summary.json").write_text(json.dumps(analysis.valley_summary(sinc, learned), indent=1) + "\n")
    (out / "config.json").write_text(cfg.to_json())
    return 0


def cmd_synth(cfg: ExperimentConfig, out_dir) -> int:
    profiles = cfg.load_profiles() or data.default_profiles(cfg.n_classes, jitter=cfg.jitter)
    utts = _noisy(cfg, data.synth_dataset(profiles, cfg.utts_per_class, cfg.duration_s, cfg.sample_rate,
                                          cfg.seed), cfg.seed)
    out = _prepare_out(out_dir)
    data.write_manifest(utts, out)
    (out / "profiles.json").write_text(json.dumps(data.profiles_to_json(profiles), indent=1) + "\n")
    return 0


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sincfront", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config field (JSON value); repeatable")
        return p

    experiment("train", "train one model and write checkpoint, trace and config")
    experiment("valley", "paired noisy-band run for both first-layer variants")
    experiment("synth", "write a synthetic speaker dataset as WAVs plus manifest")

    p = sub.add_parser("respond", help="export per-filter and cumulative frequency responses")
    p.add_argument("checkpoint")
    p.add_argument("--grid", type=int, default=2048, help="points on [0, fs/2]")
    p.add_argument("--out", required=True)
    p.add_argument("--min-peak", type=float, default=0.1, help="relative height for the peak list")

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter group")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-first-layer", action="store_true", help=argparse.SUPPRESS)
    return parser


def _report(exc: BaseException, code: int) -> int:
    msg = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    print(json.dumps(msg), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "respond":
            return cmd_respond(args.checkpoint, args.grid, args.out, args.min_peak)
        if args.command == "gradcheck":
            return cmd_gradcheck(args.seed, args.corrupt_first_layer)
        cfg = ExperimentConfig.load(args.config, args.set, args.seed)
        command = {"train": cmd_train, "valley": cmd_valley, "synth": cmd_synth}[args.command]
        return command(cfg, args.out)
    except SincFrontError as exc:
        return _report(exc, exc.exit_code)
    except (TypeError, ValueError) as exc:
        # badly typed config values surface here
        return _report(exc, 2)
    except OSError as exc:
        return _report(exc, EXIT_IO)
    except FloatingPointError as exc:
        return _report(exc, 4)


def main() -> None:
    np.seterr(all="ignore")
    sys.exit(run())


if __name__ == "__main__":
    main()
