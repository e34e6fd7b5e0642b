"""Binary weight files.

Layout: the magic ``PTTW1``, a one-line JSON header mapping tensor names to
``[rows, cols]`` in declaration order and terminated by ``\\n``, then each
tensor's little-endian float64 values, row-major, in header order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import structlog

from pttreg.attention.weights import ParameterBundle, TensorSpec
from pttreg.constants import WEIGHTS_MAGIC
from pttreg.numerics.linalg import Matrix
from pttreg.utils.exceptions import DataError, WeightsFormatError

log = structlog.get_logger()

_FLOAT = np.dtype("<f8")


def save_bundle(path: str | Path, bundle: ParameterBundle) -> None:
    path = Path(path)
    header = json.dumps({name: list(t.shape) for name, t in bundle.items()}, separators=(",", ":"))
    try:
        with path.open("wb") as fh:
            fh.write(WEIGHTS_MAGIC)
            fh.write(header.encode("utf-8") + b"\n")
            for tensor in bundle.values():
                fh.write(np.ascontiguousarray(tensor, dtype=_FLOAT).tobytes())
    except OSError as exc:
        raise DataError(f"cannot write weights to {path}: {exc}") from exc
    log.info("weights_saved", path=str(path), tensors=len(bundle))


def _parse_header(raw: bytes) -> dict[str, tuple[int, int]]:
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WeightsFormatError(f"unreadable header: {exc}") from exc
    if not isinstance(header, dict):
        raise WeightsFormatError("header must be a JSON object")
    shapes: dict[str, tuple[int, int]] = {}
    for name, shape in header.items():
        if (
            not isinstance(shape, list)
            or len(shape) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in shape)
        ):
            raise WeightsFormatError(f"bad shape {shape!r}", name)
        shapes[name] = (shape[0], shape[1])
    return shapes


def load_bundle(path: str | Path, specs: list[TensorSpec] | None = None) -> ParameterBundle:
    """Read a weight file, optionally checking it against declared specs.

    Raises:
        WeightsFormatError: Bad magic or header, truncated data (naming the
            first incomplete tensor), trailing bytes, or a shape mismatch.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read weights {path}: {exc}") from exc
    if not data.startswith(WEIGHTS_MAGIC):
        raise WeightsFormatError(f"{path} is not a weight file (bad magic)")
    end = data.find(b"\n", len(WEIGHTS_MAGIC))
    if end < 0:
        raise WeightsFormatError(f"{path}: header is not terminated")
    shapes = _parse_header(data[len(WEIGHTS_MAGIC) : end])

    offset = end + 1
    tensors: dict[str, Matrix] = {}
    for name, (rows, cols) in shapes.items():
        count = rows * cols
        if offset + count * _FLOAT.itemsize > len(data):
            raise WeightsFormatError("truncated tensor data", name)
        values = np.frombuffer(data, dtype=_FLOAT, count=count, offset=offset)
        tensor = values.astype(np.float64).reshape(rows, cols)
        if not np.all(np.isfinite(tensor)):
            raise WeightsFormatError("non-finite values", name)
        tensor.flags.writeable = False
        tensors[name] = tensor
        offset += count * _FLOAT.itemsize
    if offset != len(data):
        raise WeightsFormatError(f"{path}: {len(data) - offset} trailing bytes after the last tensor")

    bundle = ParameterBundle(tensors)
    if specs is not None:
        bundle.check_specs(specs)
    log.debug("weights_loaded", path=str(path), tensors=len(bundle))
    return bundle
