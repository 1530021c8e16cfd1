"""Bit-exact file formats: field snapshots and CSV energy logs.

Snapshot layout: one UTF-8 header line (space-separated ``key=value`` pairs,
terminated by a newline byte) followed by the raw payload of little-endian
64-bit floats, row-major, ``n^dim`` values.  Floats in the header use
Python's shortest round-trip decimal form, so write/read is lossless.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Grid
from .spectral import Field
from .stepper import EnergyRecord

__all__ = [
    "SnapshotMeta",
    "SnapshotError",
    "write_snapshot",
    "read_snapshot",
    "write_energy_log",
    "read_energy_log",
]

MAGIC = "spfcfield"
FORMAT_VERSION = 1
ENERGY_COLUMNS = ("step", "time", "E", "E_mod", "mass", "h2_norm", "psd_iters", "residual")


class SnapshotError(ValueError):
    """Malformed snapshot file (bad header, version/shape mismatch, short payload)."""


@dataclass
class SnapshotMeta:
    """Header metadata of a snapshot file."""

    dim: int
    n: int
    length: float
    time: float
    step: int
    scheme: str
    epsilon: float
    reg_a: float
    seed: int
    version: int = FORMAT_VERSION


def _header_line(meta: SnapshotMeta) -> str:
    return (
        f"{MAGIC} version={meta.version} dim={meta.dim} n={meta.n} "
        f"length={meta.length!r} time={meta.time!r} step={meta.step} "
        f"scheme={meta.scheme} epsilon={meta.epsilon!r} A={meta.reg_a!r} "
        f"seed={meta.seed}\n"
    )


def write_snapshot(field: Field, meta: SnapshotMeta, path) -> None:
    if field.grid.dim != meta.dim or field.grid.n != meta.n:
        raise SnapshotError(
            f"metadata ({meta.dim}d, n={meta.n}) does not match the field "
            f"({field.grid.dim}d, n={field.grid.n})"
        )
    with open(path, "wb") as fh:
        fh.write(_header_line(meta).encode("utf-8"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[Field, SnapshotMeta]:
    with open(path, "rb") as fh:
        header = bytearray()
        while True:
            byte = fh.read(1)
            if not byte:
                raise SnapshotError("unterminated header")
            if byte == b"\n":
                break
            header.extend(byte)
            if len(header) > 4096:
                raise SnapshotError("header too long; not a snapshot file")
        payload = fh.read()

    parts = header.decode("utf-8").split()
    if not parts or parts[0] != MAGIC:
        raise SnapshotError(f"bad magic; expected {MAGIC!r}")
    kv = {}
    for part in parts[1:]:
        key, _, value = part.partition("=")
        kv[key] = value
    try:
        meta = SnapshotMeta(
            version=int(kv["version"]),
            dim=int(kv["dim"]),
            n=int(kv["n"]),
            length=float(kv["length"]),
            time=float(kv["time"]),
            step=int(kv["step"]),
            scheme=kv["scheme"],
            epsilon=float(kv["epsilon"]),
            reg_a=float(kv["A"]),
            seed=int(kv["seed"]),
        )
    except (KeyError, ValueError) as exc:
        raise SnapshotError(f"malformed header: {exc}") from exc
    if meta.version != FORMAT_VERSION:
        raise SnapshotError(f"unsupported format version {meta.version}")
    if meta.dim not in (2, 3):
        raise SnapshotError(f"bad dimension {meta.dim}")
    expected = meta.n**meta.dim * 8
    if len(payload) != expected:
        raise SnapshotError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape((meta.n,) * meta.dim)
    grid = Grid(dim=meta.dim, n=meta.n, length=meta.length)
    return Field(grid, values.copy()), meta


def write_energy_log(records: Sequence[EnergyRecord], path) -> None:
    """CSV energy log; floats use shortest round-trip decimals."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(ENERGY_COLUMNS) + "\n")
        for r in records:
            fh.write(
                f"{r.step},{r.time!r},{r.E!r},{r.E_mod!r},{r.mass!r},"
                f"{r.h2_norm!r},{r.psd_iters},{r.final_residual!r}\n"
            )


def read_energy_log(path) -> list[EnergyRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(ENERGY_COLUMNS):
            raise ValueError(f"unexpected energy-log header: {header!r}")
        records = []
        for line in fh:
            if not line.strip():
                continue
            bits = line.strip().split(",")
            records.append(
                EnergyRecord(
                    step=int(bits[0]),
                    time=float(bits[1]),
                    E=float(bits[2]),
                    E_mod=float(bits[3]),
                    mass=float(bits[4]),
                    h2_norm=float(bits[5]),
                    psd_iters=int(bits[6]),
                    final_residual=float(bits[7]),
                )
            )
    return records


def snapshot_path(directory, step: int) -> str:
    return os.path.join(directory, f"snap_{step:08d}.spfc")
