"""
Checkpoint persistence (schema ckpt-v1).

A checkpoint is a JSON document holding, per named network, its NetSpec, the
flat parameter vector and the optimizer moments, plus RNG states and free-form
metadata. Floats are written with their shortest round-trip repr, so
load(save(p)) reproduces p bit for bit.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from spectrum.exceptions import CheckpointError, ContractViolation
from spectrum.neural.network import NetSpec
from spectrum.neural.optimizer import Adam
from spectrum.utils.serialization import CHECKPOINT_SCHEMA, to_jsonable

logger = logging.getLogger(__name__)


@dataclass
class NetworkState:
    """Everything needed to resume one network."""
    spec: NetSpec
    params: np.ndarray
    optimizer: Optional[Adam] = None


@dataclass
class Checkpoint:
    networks: Dict[str, NetworkState]
    config_hash: Optional[str] = None
    iteration: int = 0
    rng_states: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: Path | str, checkpoint: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "config_hash": checkpoint.config_hash,
        "iteration": checkpoint.iteration,
        "rng_states": to_jsonable(checkpoint.rng_states),
        "metadata": to_jsonable(checkpoint.metadata),
        "networks": {
            name: {
                "spec": state.spec.to_dict(),
                "params": state.params.tolist(),
                "optimizer": state.optimizer.to_dict() if state.optimizer else None,
            }
            for name, state in checkpoint.networks.items()
        },
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload))
    tmp.replace(path)
    logger.info(f"Checkpoint saved: {path} (iteration {checkpoint.iteration})")
    return path


def load_checkpoint(path: Path | str, expected_hash: Optional[str] = None) -> Checkpoint:
    """
    Read a checkpoint.

    Args:
        path: Checkpoint file
        expected_hash: When given, the stored config hash must match it

    Raises:
        CheckpointError: unreadable file, wrong schema, malformed network entry
            or config hash mismatch
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if data.get("schema") != CHECKPOINT_SCHEMA:
        raise CheckpointError(f"{path}: expected schema {CHECKPOINT_SCHEMA}, found {data.get('schema')!r}")
    if expected_hash is not None and data.get("config_hash") != expected_hash:
        raise CheckpointError(
            f"{path}: checkpoint was produced by config {data.get('config_hash')}, "
            f"current config is {expected_hash}"
        )

    networks = {}
    try:
        for name, entry in data["networks"].items():
            optimizer = Adam.from_dict(entry["optimizer"]) if entry.get("optimizer") else None
            networks[name] = NetworkState(
                spec=NetSpec.from_dict(entry["spec"]),
                params=np.asarray(entry["params"], dtype=float),
                optimizer=optimizer,
            )
    except (KeyError, TypeError, ValueError, ContractViolation) as e:
        raise CheckpointError(f"{path}: malformed network entry: {e}") from e

    return Checkpoint(
        networks=networks,
        config_hash=data.get("config_hash"),
        iteration=int(data.get("iteration", 0)),
        rng_states=data.get("rng_states", {}),
        metadata=data.get("metadata", {}),
    )
