"""Plain-text (JSON) model files.

A model file records the format version, task, schema, learners with their
hyperparameters, the loss, the ART settings and seed, and every candidate's
parameters next to its final weight. Files are written with sorted keys and
fixed indentation, so load -> save reproduces the bytes exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import DataError, Loss, LossKind, Task
from .learners import model_from_dict
from .pipeline import ArtConfig, ArtModel, WeightMode

FORMAT = "artlearn-model"
FORMAT_VERSION = 1


def model_to_dict(model: ArtModel, feature_names, response, loss: Loss, learner_params=()) -> dict:
    cfg = asdict(model.config_used)
    cfg["weight_mode"] = model.config_used.weight_mode.value
    cfg["priors"] = None if cfg["priors"] is None else [float(x) for x in cfg["priors"]]
    candidates = []
    for w, g in zip(model.final_weights, model.candidates):
        entry = g.to_dict()
        entry["weight"] = float(w)
        candidates.append(entry)
    learners = [
        {"name": name, "params": dict(params)}
        for name, params in zip(model.learner_names, learner_params or [{}] * len(model.learner_names))
    ]
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "task": model.task.value,
        "response": response,
        "feature_names": list(feature_names),
        "learners": learners,
        "loss": {"kind": loss.kind.value, "tau": loss.tau, "eps_clip": loss.eps_clip},
        "config": cfg,
        "lambda": model.lam,
        "seed": model.config_used.seed,
        "candidates": candidates,
    }


def model_from_file_dict(d: dict):
    """Rebuild ``(ArtModel, metadata)`` from a parsed model file."""
    if d.get("format") != FORMAT:
        raise DataError("not an artlearn model file")
    if d.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {d.get('format_version')!r} (expected {FORMAT_VERSION})")
    try:
        cfg = dict(d["config"])
        cfg["weight_mode"] = WeightMode(cfg["weight_mode"])
        config = ArtConfig(**cfg)
        candidates = tuple(model_from_dict(c) for c in d["candidates"])
        weights = np.array([c["weight"] for c in d["candidates"]], dtype=float)
        model = ArtModel(
            candidates=candidates,
            final_weights=weights,
            task=Task(d["task"]),
            learner_names=tuple(l["name"] for l in d["learners"]),
            config_used=config,
            p=len(d["feature_names"]),
            lam=float(d["lambda"]),
        )
        loss = Loss(LossKind(d["loss"]["kind"]), tau=d["loss"]["tau"], eps_clip=d["loss"]["eps_clip"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model file: {exc}") from exc
    meta = {
        "feature_names": list(d["feature_names"]),
        "response": d["response"],
        "loss": loss,
        "learners": d["learners"],
    }
    return model, meta


def dumps(d: dict) -> str:
    return json.dumps(d, indent=2, sort_keys=True) + "\n"


def save_model(path, model: ArtModel, feature_names, response, loss: Loss, learner_params=()) -> str:
    text = dumps(model_to_dict(model, feature_names, response, loss, learner_params))
    Path(path).write_text(text, encoding="utf-8")
    return text


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_file_dict(d)
