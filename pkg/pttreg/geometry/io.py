"""Point cloud and transform file readers/writers.

Supported cloud formats:

* XYZ ASCII: one point per line, three whitespace-separated decimals;
  anything after ``#`` is a comment.
* PLY ASCII: a ``vertex`` element with ``x``/``y``/``z`` properties; other
  properties and elements are ignored.

Transform files hold 16 whitespace-separated decimals, a row-major 4x4
homogeneous matrix whose last row is ``0 0 0 1``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.transform import RigidTransform
from pttreg.utils.exceptions import (
    CloudParseError,
    ContractViolationError,
    DataError,
    EmptyCloudError,
)


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _parse_floats(tokens: list[str], path: Path, line_no: int) -> list[float]:
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise CloudParseError(str(path), line_no, f"not a number in {' '.join(tokens)!r}") from None
    if not all(np.isfinite(values)):
        raise CloudParseError(str(path), line_no, "non-finite coordinate")
    return values


def _load_xyz(path: Path) -> list[list[float]]:
    points: list[list[float]] = []
    for line_no, raw in enumerate(_read_lines(path), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        if len(tokens) != 3:
            raise CloudParseError(str(path), line_no, f"expected 3 values, got {len(tokens)}")
        points.append(_parse_floats(tokens, path, line_no))
    return points


def _load_ply(path: Path) -> list[list[float]]:
    lines = _read_lines(path)
    if not lines or lines[0].strip() != "ply":
        raise CloudParseError(str(path), 1, "missing 'ply' magic line")

    elements: list[tuple[str, int, list[str]]] = []
    header_end = None
    for line_no, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise CloudParseError(str(path), line_no, "only ASCII PLY is supported")
        elif tokens[0] == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise CloudParseError(str(path), line_no, "malformed element line")
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise CloudParseError(str(path), line_no, "property before any element")
            elements[-1][2].append(tokens[-1])
        elif tokens[0] == "end_header":
            header_end = line_no
            break
        else:
            raise CloudParseError(str(path), line_no, f"unknown header keyword {tokens[0]!r}")
    if header_end is None:
        raise CloudParseError(str(path), len(lines), "missing end_header")

    points: list[list[float]] = []
    line_no = header_end
    for name, count, props in elements:
        if name == "vertex":
            missing = [axis for axis in ("x", "y", "z") if axis not in props]
            if missing:
                raise CloudParseError(str(path), header_end, f"vertex lacks properties {missing}")
            cols = [props.index(axis) for axis in ("x", "y", "z")]
        for _ in range(count):
            line_no += 1
            if line_no > len(lines):
                raise CloudParseError(str(path), line_no, f"unexpected end of {name} data")
            if name != "vertex":
                continue
            tokens = lines[line_no - 1].split()
            if len(tokens) < len(props):
                raise CloudParseError(str(path), line_no, "too few vertex values")
            points.append(_parse_floats([tokens[c] for c in cols], path, line_no))
    return points


def load_cloud(path: str | Path) -> PointCloud:
    """Read an XYZ or ASCII PLY file, chosen by suffix (.ply, else XYZ).

    Raises:
        CloudParseError: With the offending line number.
        EmptyCloudError: If the file holds no points.
    """
    path = Path(path)
    points = _load_ply(path) if path.suffix.lower() == ".ply" else _load_xyz(path)
    if not points:
        raise EmptyCloudError(f"{path} contains no points")
    return PointCloud(np.array(points, dtype=np.float64), path.stem)


def save_cloud(path: str | Path, cloud: PointCloud) -> None:
    """Write a cloud as PLY (for .ply) or XYZ, using round-trip float repr."""
    path = Path(path)
    rows = [" ".join(repr(float(v)) for v in p) for p in cloud.points]
    if path.suffix.lower() == ".ply":
        header = [
            "ply",
            "format ascii 1.0",
            f"element vertex {len(cloud)}",
            "property double x",
            "property double y",
            "property double z",
            "end_header",
        ]
        rows = header + rows
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def load_transform(path: str | Path) -> RigidTransform:
    """Read a 4x4 row-major homogeneous transform."""
    path = Path(path)
    tokens: list[str] = []
    for raw in _read_lines(path):
        tokens.extend(raw.split("#", 1)[0].split())
    if len(tokens) != 16:
        raise DataError(f"{path}: expected 16 values, got {len(tokens)}")
    try:
        values = np.array([float(t) for t in tokens]).reshape(4, 4)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    try:
        return RigidTransform.from_matrix(values)
    except ContractViolationError as exc:
        raise DataError(f"{path}: {exc}") from exc


def save_transform(path: str | Path, transform: RigidTransform) -> None:
    m = transform.as_matrix()
    path = Path(path)
    path.write_text(
        "\n".join(" ".join(repr(float(v)) for v in row) for row in m) + "\n", encoding="utf-8"
    )
