"""File formats and run manifests.

Label and feature matrices are stored as plain CSV (one row per frame)
next to a one-line JSON sidecar holding the grid and provenance metadata.
Evaluation and experiment results are CSV plus a JSON summary. Every file
is written atomically (temp file + rename) so interrupted runs never
leave corrupt outputs, and manifests contain no wall-clock data, keeping
reruns byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError
from .metrics import EvalResult
from .quantize import FrameGrid, LabelingFunction, LabelMatrix
from .synth import FeatureMatrix
from .trainer import ExperimentTable


def atomic_write_text(path: Path, text: str) -> None:
    """Write text via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def sidecar_path(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _format_float(x: float) -> str:
    return repr(float(x))


def write_label_matrix(matrix: LabelMatrix, csv_path: Path) -> None:
    """Write frames as 0/1 CSV plus the one-line JSON sidecar."""
    csv_path = Path(csv_path)
    lines = [",".join(str(int(v)) for v in row) for row in matrix.frames]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    sidecar = {
        "fps": matrix.grid.fps,
        "num_frames": matrix.num_frames,
        "num_labels": matrix.num_labels,
        "labeling_function": matrix.labeling_function.letter
        if matrix.labeling_function is not None else None,
        "seed": matrix.seed,
    }
    atomic_write_text(sidecar_path(csv_path),
                      json.dumps(sidecar, sort_keys=True) + "\n")


def read_label_matrix(csv_path: Path) -> LabelMatrix:
    """Read a matrix CSV and its sidecar back into a LabelMatrix."""
    csv_path = Path(csv_path)
    side = sidecar_path(csv_path)
    if not side.exists():
        raise ContractError(f"fps metadata missing: expected sidecar {side}")
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable sidecar {side}: {exc}") from None
    if "fps" not in meta:
        raise ContractError(f"fps metadata missing from sidecar {side}")

    rows = []
    for lineno, line in enumerate(csv_path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([int(v) for v in line.split(",")])
        except ValueError:
            raise FormatError(f"{csv_path}: line {lineno}: non-integer cell") from None
    if not rows:
        raise FormatError(f"{csv_path}: empty matrix")
    frames = np.array(rows, dtype=np.int64)
    if frames.min() < 0 or frames.max() > 1:
        raise FormatError(f"{csv_path}: cells must be 0 or 1")
    if "num_frames" in meta and meta["num_frames"] != frames.shape[0]:
        raise FormatError(
            f"{csv_path}: {frames.shape[0]} rows but sidecar says {meta['num_frames']}")
    if "num_labels" in meta and meta["num_labels"] != frames.shape[1]:
        raise FormatError(
            f"{csv_path}: {frames.shape[1]} columns but sidecar says {meta['num_labels']}")

    fn_letter = meta.get("labeling_function")
    return LabelMatrix(
        frames=frames.astype(np.uint8),
        grid=FrameGrid(fps=float(meta["fps"]), num_frames=frames.shape[0]),
        labeling_function=LabelingFunction.from_letter(fn_letter) if fn_letter else None,
        seed=meta.get("seed"),
    )


def write_feature_matrix(features: FeatureMatrix, csv_path: Path) -> None:
    csv_path = Path(csv_path)
    lines = [",".join(_format_float(v) for v in row) for row in features.values]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    sidecar = {
        "fps": features.grid.fps,
        "num_frames": features.num_frames,
        "feature_dim": features.feature_dim,
    }
    atomic_write_text(sidecar_path(csv_path),
                      json.dumps(sidecar, sort_keys=True) + "\n")


def read_feature_matrix(csv_path: Path) -> FeatureMatrix:
    csv_path = Path(csv_path)
    side = sidecar_path(csv_path)
    if not side.exists():
        raise ContractError(f"fps metadata missing: expected sidecar {side}")
    meta = json.loads(side.read_text(encoding="utf-8"))
    if "fps" not in meta:
        raise ContractError(f"fps metadata missing from sidecar {side}")
    values = np.array([
        [float(v) for v in line.split(",")]
        for line in csv_path.read_text(encoding="utf-8").splitlines() if line.strip()
    ])
    if values.size == 0:
        raise FormatError(f"{csv_path}: empty matrix")
    return FeatureMatrix(values=values,
                         grid=FrameGrid(fps=float(meta["fps"]), num_frames=values.shape[0]))


EVAL_CSV_HEADER = "piece,fn,seed,fps,tp,fp,fn,precision,recall,fmeasure"


def eval_row(piece: str, fn_letter: str, seed, fps: float, result: EvalResult) -> str:
    seed_field = "" if seed is None else str(seed)
    return ",".join([
        piece, fn_letter, seed_field, _format_float(fps),
        str(result.counts.tp), str(result.counts.fp), str(result.counts.fn_),
        _format_float(result.precision), _format_float(result.recall),
        _format_float(result.fmeasure),
    ])


def write_eval_csv(rows: list[str], path: Path) -> None:
    atomic_write_text(path, "\n".join([EVAL_CSV_HEADER] + rows) + "\n")


EXPERIMENT_CSV_HEADER = "fn,seed,split,precision,recall,fmeasure"


def write_experiment_csv(table: ExperimentTable, path: Path) -> None:
    lines = [EXPERIMENT_CSV_HEADER]
    for row in table.rows:
        lines.append(",".join([
            row.fn.letter, str(row.seed), row.split,
            _format_float(row.precision), _format_float(row.recall),
            _format_float(row.fmeasure),
        ]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(path: Path, command: str, config: dict,
                   seeds: list[int], inputs: list[Path], version: str) -> None:
    """Record everything needed to reproduce a run byte-identically.

    Contains the command, the fully resolved configuration, the seeds,
    sha256 digests of all input files, and the tool version. Deliberately
    no timestamps or host data.
    """
    manifest = {
        "command": command,
        "config": config,
        "seeds": list(seeds),
        "inputs": {Path(p).name: file_digest(p) for p in inputs},
        "tool_version": version,
    }
    write_json(path, manifest)
