"""Paired sinc-layer vs learned-taps training runs on the synthetic speaker task."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from .analysis import sentence_vote
from .conv import frame_signal
from .model import LEARNED, SINC, ModelConfig, OptState, chunk_error, init_state, predict, stack_chunks, train


def desk_model_config(**overrides) -> ModelConfig:
    """Scaled-down model used by the acceptance experiments.

    Same pipeline and filter length as the full-size defaults, with half the
    filters, a wider pool and a narrower hidden layer so five seeds of both
    variants fit in minutes on one CPU core.
    """
    base = dict(n_filters=40, filter_length=251, pool_width=16, hidden_size=64, n_classes=10)
    base.update(overrides)
    return ModelConfig(**base)


@dataclass
class TaskConfig:
    n_classes: int = 10
    utts_per_class: int = 8
    heldout_per_class: int = 2
    duration_s: float = 2.0
    sample_rate: int = 16000
    chunk_ms: float = 200.0
    overlap_ms: float = 10.0


def make_task(task: TaskConfig, seed: int, profiles=None):
    """Synthetic utterances split by utterance into train and held-out chunk lists.

    The last ``heldout_per_class`` utterances of every class are held out.
    Returns (train_chunks, heldout_chunks, heldout_utterance_ids).
    """
    profiles = profiles or data_mod.default_profiles(task.n_classes)
    utts = data_mod.synth_dataset(profiles, task.utts_per_class, task.duration_s, task.sample_rate, seed)
    train_chunks, held_chunks = [], []
    for u in utts:
        k = int(u.id.split("_u")[1])
        chunks = frame_signal(u.samples, task.sample_rate, task.chunk_ms, task.overlap_ms, u.label, u.id)
        (held_chunks if k >= task.utts_per_class - task.heldout_per_class else train_chunks).extend(chunks)
    return train_chunks, held_chunks


def sentence_error(state, chunks) -> float:
    """Utterance-level error from averaged chunk posteriors."""
    X, y = stack_chunks(chunks)
    post = predict(state, X)
    ids = [c.source_id for c in chunks]
    wrong = []
    for uid in dict.fromkeys(ids):
        sel = [i for i, s in enumerate(ids) if s == uid]
        wrong.append(sentence_vote(post[sel]) != y[sel[0]])
    return float(np.mean(wrong))


@dataclass
class RunResult:
    variant: str
    heldout_errors: list[float]
    train_losses: list[float]
    final_chunk_error: float
    final_sentence_error: float

    def first_epoch_below(self, threshold: float) -> int | None:
        for i, e in enumerate(self.heldout_errors, start=1):
            if e < threshold:
                return i
        return None


@dataclass
class ConvergenceConfig:
    model: ModelConfig = field(default_factory=desk_model_config)
    task: TaskConfig = field(default_factory=TaskConfig)
    epochs: int = 15
    opt: dict = field(default_factory=dict)


def run_variant(cfg: ConvergenceConfig, variant: str, train_chunks, held_chunks, seed: int) -> RunResult:
    state = init_state(replace(cfg.model, variant=variant), seed)
    state, trace = train(state, OptState(**cfg.opt), train_chunks, cfg.epochs, seed, eval_set=held_chunks)
    return RunResult(variant, [r.heldout_error for r in trace], [r.mean_loss for r in trace],
                     chunk_error(state, held_chunks), sentence_error(state, held_chunks))


def convergence_experiment(cfg: ConvergenceConfig, seed: int = 0) -> tuple[RunResult, RunResult]:
    """Both variants on the same data, init seed and minibatch order."""
    train_chunks, held_chunks = make_task(cfg.task, seed)
    return (run_variant(cfg, SINC, train_chunks, held_chunks, seed),
            run_variant(cfg, LEARNED, train_chunks, held_chunks, seed))
