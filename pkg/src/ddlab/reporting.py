"""Deterministic result files: CSVs, binary dumps, manifests.

Floats are written with shortest round-trip formatting (up to 17
significant digits), so parsing a file and re-emitting it reproduces the
bytes exactly, and repeated runs of the same configuration produce
byte-identical outputs.  Manifests carry a hash of the configuration,
hashes of every (non-volatile) output, and tool versions; they contain
no timestamps.  Wall-clock time lives only in the run-metadata document,
which is excluded from the manifest hashes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from . import __version__


def fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def roundtrip_csv(path: Path) -> bytes:
    """Parse a CSV we wrote and re-emit it (used to verify stability)."""
    header, rows = read_csv(path)

    def revive(tok: str):
        if tok in ("true", "false"):
            return tok == "true"
        try:
            return int(tok)
        except ValueError:
            pass
        try:
            return float(tok)
        except ValueError:
            return tok

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(revive(tok)) for tok in row))
    return ("\n".join(lines) + "\n").encode()


def write_snapshot_csv(path: Path, x: np.ndarray, u: np.ndarray) -> Path:
    return write_csv(path, ["x", "u"], zip(x, u))


def write_field2d_csv(path: Path, x: np.ndarray, y: np.ndarray,
                      values: np.ndarray) -> Path:
    rows = ((x[i], y[j], values[i, j])
            for i in range(x.size) for j in range(y.size))
    return write_csv(path, ["x", "y", "u"], rows)


FIELD2D_MAGIC = b"DDF2"


def write_field2d_binary(path: Path, values: np.ndarray, extents, time: float) -> Path:
    """Compact dump: magic, int64 dims, 5 doubles (extents + time), then
    row-major float64 values, everything little-endian."""
    path = Path(path)
    nx, ny = values.shape
    with open(path, "wb") as fh:
        fh.write(FIELD2D_MAGIC)
        fh.write(struct.pack("<qq", nx, ny))
        fh.write(struct.pack("<5d", *extents, time))
        fh.write(values.astype("<f8").tobytes(order="C"))
    return path


def read_field2d_binary(path: Path):
    raw = Path(path).read_bytes()
    if raw[:4] != FIELD2D_MAGIC:
        raise ValueError("not a field dump (bad magic)")
    nx, ny = struct.unpack("<qq", raw[4:20])
    extents = struct.unpack("<5d", raw[20:60])
    values = np.frombuffer(raw[60:], dtype="<f8").reshape(nx, ny)
    return values, extents[:4], extents[4]


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def write_manifest(out_dir: Path, config_text: str, outputs: list[Path],
                   volatile: list[Path] = ()) -> Path:
    out_dir = Path(out_dir)
    entries = [{"name": p.name, "sha256": sha256_file(p)}
               for p in sorted(outputs, key=lambda p: p.name)]
    entries += [{"name": p.name, "volatile": True}
                for p in sorted(volatile, key=lambda p: p.name)]
    manifest = {
        "config_sha256": sha256_bytes(config_text.encode()),
        "outputs": entries,
        "versions": {"ddlab": __version__, "numpy": np.__version__},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def write_metadata(path: Path, mapping: dict) -> Path:
    lines = [f"{k} = {fmt(v)}" for k, v in mapping.items()]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)
