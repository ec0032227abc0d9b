"""Generalized zero-shot multi-label classification by aligning visual and
semantic embeddings in a shared latent space."""

import json
import os

from . import _core
from ._core import (
    Error,
    InductiveViolation,
    Problem,
    ValidationError,
    auroc,
    cosine_similarity,
    gradcheck,
    harmonic_mean,
    load_manifest,
)

__all__ = [
    "Error",
    "InductiveViolation",
    "Problem",
    "ValidationError",
    "auroc",
    "bayes_reference_auroc",
    "cli",
    "cosine_similarity",
    "default_config",
    "evaluate",
    "generate",
    "gradcheck",
    "harmonic_mean",
    "load_manifest",
    "train",
]


def default_config():
    return json.loads(_core.default_config_json())


def generate(out_dir, **spec):
    """Writes a synthetic benchmark to out_dir; returns the manifest path."""
    return _core.generate(os.fspath(out_dir), json.dumps(spec))


def bayes_reference_auroc(split="test", **spec):
    return _core.bayes_reference_auroc(json.dumps(spec), split)


def train(manifest, config=None, out_dir=None):
    """Trains on a manifest. `config` overlays the defaults (same keys as
    config.json). Returns a dict with the best epoch, per-epoch trace and the
    best validation metrics."""
    out = None if out_dir is None else os.fspath(out_dir)
    return json.loads(_core.train(os.fspath(manifest), json.dumps(config or {}), out))


def evaluate(checkpoint, manifest, split="test", ks=(2, 3)):
    return json.loads(_core.evaluate(os.fspath(checkpoint), os.fspath(manifest), split, list(ks)))


def cli(*args):
    """Runs the gzsl-align command line in-process; returns the exit code."""
    return _core.cli([str(a) for a in args])
