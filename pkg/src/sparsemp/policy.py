"""JSON policy files: the trained parameters a controller would load.

Schema version 1. Coefficients are stored as sorted active rows plus their
values; floats go through Python's shortest-repr decimal serialization,
which reproduces every double bit-exactly on load.
"""

from __future__ import annotations

import json

import numpy as np

from .baselines import DmpModel, RidgeModel
from .rbf import RbfParams, StackedRbfParams
from .trainers import TrainedPrimitive

SCHEMA_VERSION = 1


def _coef_block(W: np.ndarray) -> dict:
    active = np.flatnonzero(np.linalg.norm(np.atleast_2d(W), axis=1) > 0)
    return {
        "n_features": int(W.shape[0]),
        "n_tasks": int(W.shape[1]),
        "active_rows": [int(i) for i in active],
        "values": [list(map(float, W[i])) for i in active],
    }


def _coef_from_block(block: dict) -> np.ndarray:
    W = np.zeros((block["n_features"], block["n_tasks"]))
    for i, row in zip(block["active_rows"], block["values"]):
        W[i] = row
    return W


def primitive_to_dict(prim: TrainedPrimitive, ground_truth: bool = False) -> dict:
    if prim.mode == "clsdp":
        centers = [list(map(float, p.mu)) for p in prim.rbf_params.per_dof]
        widths = [list(map(float, p.sigma2)) for p in prim.rbf_params.per_dof]
        intercepts = [list(map(float, row)) for row in prim.intercepts]
    else:
        centers = list(map(float, prim.rbf_params.mu))
        widths = list(map(float, prim.rbf_params.sigma2))
        intercepts = list(map(float, prim.intercepts))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": prim.mode,
        "dt": float(prim.dt),
        "duration": float(prim.duration),
        "n": int(prim.n_dof),
        "d": int(prim.n_demos),
        "intercepts": intercepts,
        "centers": centers,
        "widths": widths,
        "coefficients": _coef_block(prim.W),
        "metadata": _jsonable(prim.metadata),
    }
    if ground_truth:
        doc["ground_truth"] = True
    return doc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def primitive_from_dict(doc: dict) -> TrainedPrimitive:
    mode = doc["method"]
    meta = doc["metadata"]
    N = int(meta["n_samples"])
    t = np.arange(N) * doc["dt"]
    if mode == "clsdp":
        params = StackedRbfParams(per_dof=[
            RbfParams(mu=np.array(mu), sigma2=np.array(s2))
            for mu, s2 in zip(doc["centers"], doc["widths"])
        ])
        intercepts = np.array(doc["intercepts"])
    else:
        params = RbfParams(mu=np.array(doc["centers"]), sigma2=np.array(doc["widths"]))
        intercepts = np.array(doc["intercepts"])
    return TrainedPrimitive(
        mode=mode,
        intercepts=intercepts,
        rbf_params=params,
        W=_coef_from_block(doc["coefficients"]),
        t=t,
        metadata=dict(meta),
    )


def dmp_to_dict(model: DmpModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "method": "dmp",
        "dt": float(model.dt),
        "duration": float(model.tau),
        "n": int(model.n_dof),
        "d": 1,
        "weights": [list(map(float, row)) for row in model.weights],
        "goal": list(map(float, model.goal)),
        "y0": list(map(float, model.y0)),
        "tau": float(model.tau),
        "alpha_z": float(model.alpha_z),
        "beta_z": float(model.beta_z),
        "alpha_x": float(model.alpha_x),
        "phase_centers": list(map(float, model.centers)),
        "phase_widths": list(map(float, model.widths)),
    }


def dmp_from_dict(doc: dict) -> DmpModel:
    return DmpModel(
        weights=np.array(doc["weights"]),
        goal=np.array(doc["goal"]),
        y0=np.array(doc["y0"]),
        tau=doc["tau"],
        alpha_z=doc["alpha_z"],
        beta_z=doc["beta_z"],
        alpha_x=doc["alpha_x"],
        centers=np.array(doc["phase_centers"]),
        widths=np.array(doc["phase_widths"]),
        dt=doc["dt"],
    )


def ridge_to_dict(model: RidgeModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "method": "ridge",
        "dt": float(model.t[1] - model.t[0]),
        "duration": float(model.t[-1] - model.t[0]),
        "n": int(model.n_dof),
        "d": 1,
        "n_samples": int(model.t.size),
        "intercepts": list(map(float, model.intercepts)),
        "centers": list(map(float, model.rbf_params.mu)),
        "widths": list(map(float, model.rbf_params.sigma2)),
        "coefficients": _coef_block(model.W),
        "lambda2": float(model.lambda2),
    }


def ridge_from_dict(doc: dict) -> RidgeModel:
    N = int(doc["n_samples"])
    return RidgeModel(
        rbf_params=RbfParams(
            mu=np.array(doc["centers"]), sigma2=np.array(doc["widths"])
        ),
        W=_coef_from_block(doc["coefficients"]),
        intercepts=np.array(doc["intercepts"]),
        lambda2=doc["lambda2"],
        t=np.arange(N) * doc["dt"],
    )


def save_policy(path, model, ground_truth: bool = False) -> None:
    if isinstance(model, TrainedPrimitive):
        doc = primitive_to_dict(model, ground_truth=ground_truth)
    elif isinstance(model, DmpModel):
        doc = dmp_to_dict(model)
    elif isinstance(model, RidgeModel):
        doc = ridge_to_dict(model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_policy(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')}")
    method = doc["method"]
    if method in ("lsdp", "clsdp"):
        return primitive_from_dict(doc)
    if method == "dmp":
        return dmp_from_dict(doc)
    if method == "ridge":
        return ridge_from_dict(doc)
    raise ValueError(f"unknown method tag {method!r}")
