"""Python bindings for the dynembed C++ library.

Experiment functions take the same configuration dictionary as the
``dynembed`` command line tool's ``--config`` file.
"""

import json

from ._dynembed import (
    ArgumentError,
    DimensionError,
    DynamicGraph,
    Model,
    ParseError,
    Snapshot,
    SvdState,
    generate_sbm,
    generate_static_sbm,
    inc_svd_update,
    load_model,
    load_snapshots,
    map_score,
    optimal_svd,
    precision_at_k,
    reconstruction_error,
    rerun_svd_step,
    save_snapshots,
    svd_scores,
)
from . import _dynembed

__all__ = [
    "ArgumentError",
    "DimensionError",
    "DynamicGraph",
    "Model",
    "ParseError",
    "Snapshot",
    "SvdState",
    "export_embeddings",
    "generate_sbm",
    "generate_static_sbm",
    "inc_svd_update",
    "load_model",
    "load_snapshots",
    "map_score",
    "normalize_config",
    "optimal_svd",
    "precision_at_k",
    "reconstruction_error",
    "rerun_svd_step",
    "run_experiment",
    "save_snapshots",
    "sweep_history",
    "sweep_lookback",
    "svd_scores",
]


def normalize_config(config=None):
    """Return the full configuration with defaults filled in."""
    return json.loads(_dynembed._normalize_config(json.dumps(config or {})))


def run_experiment(config=None, out_dir=None):
    """Run one experiment.

    Returns ``(report, model)`` where ``report`` is the dictionary written to
    ``report.json`` and ``model`` is the trained model (``None`` for the SVD
    baselines). With ``out_dir`` the usual report files are written as well.
    """
    report, model = _dynembed._run_experiment(json.dumps(config or {}), None if out_dir is None else str(out_dir))
    return json.loads(report), model


def _sweep_rows(csv_text):
    rows = {}
    lines = csv_text.strip().splitlines()
    for line in lines[1:]:
        _method, _axis, value, target, score = line.split(",")
        if target == "mean":
            rows[int(value)] = float(score)
    return rows


def sweep_lookback(config=None, lookbacks=None, out_dir=None):
    """Mean MAP per lookback value, as ``{lookback: mean_map}``."""
    csv_text = _dynembed._sweep(json.dumps(config or {}), "lookback", list(lookbacks or []),
                                None if out_dir is None else str(out_dir))
    return _sweep_rows(csv_text)


def sweep_history(config=None, out_dir=None):
    """Mean MAP per training-prefix length, as ``{prefix: mean_map}``."""
    csv_text = _dynembed._sweep(json.dumps(config or {}), "history", [], None if out_dir is None else str(out_dir))
    return _sweep_rows(csv_text)


def export_embeddings(checkpoint, config, t, path):
    """Write the embedding of step ``t`` computed by a saved model as CSV."""
    _dynembed._export_embeddings(str(checkpoint), json.dumps(config or {}), int(t), str(path))
