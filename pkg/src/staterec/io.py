"""File formats: snapshots, sensor tables, recovery maps, and CSV reports.

Snapshot files are binary: the magic bytes ``RMRC1``, an unsigned 32-bit
little-endian coefficient count, then that many little-endian 64-bit floats.
A plain-text sidecar records level, p, the parameter entries, and the seed.
Recovery maps are a short text header (m, N, basis fingerprint) followed by
the raw ``B`` block (row-major 64-bit floats) and the raw ``c`` vector.
"""

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .fem import Snapshot
from .recovery import AffineRecoveryMap
from .sensing import Sensor

SNAPSHOT_MAGIC = b"RMRC1"
MAP_MAGIC = "RMAP1"


def write_snapshot(path, snapshot, level=None, p=None, seed=None):
    """Write a snapshot in the binary format plus its text metadata sidecar."""
    path = Path(path)
    coeffs = np.asarray(snapshot.coefficients, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", coeffs.size))
        fh.write(coeffs.tobytes())

    meta = snapshot.meta or {}
    lines = []
    lines.append(f"level {meta.get('level', level)}")
    lines.append(f"p {meta.get('p', p)}")
    lines.append(f"seed {meta.get('seed', seed)}")
    if snapshot.parameter is not None:
        entries = " ".join(repr(float(v)) for v in np.asarray(snapshot.parameter).ravel())
        lines.append(f"parameter {entries}")
    path.with_suffix(path.suffix + ".meta").write_text("\n".join(lines) + "\n")


def read_snapshot(path):
    """Read a snapshot and its sidecar back into a Snapshot."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:5] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path} is not a snapshot file (bad magic)")
    (count,) = struct.unpack("<I", raw[5:9])
    coeffs = np.frombuffer(raw[9 : 9 + 8 * count], dtype="<f8").astype(float)
    if coeffs.size != count:
        raise ValueError(f"{path} is truncated")

    meta = {}
    parameter = None
    sidecar = path.with_suffix(path.suffix + ".meta")
    if sidecar.exists():
        for line in sidecar.read_text().splitlines():
            key, _, value = line.partition(" ")
            if key == "parameter":
                flat = np.array([float(v) for v in value.split()])
                side = int(round(np.sqrt(flat.size)))
                parameter = flat.reshape(side, side)
            elif value not in ("", "None"):
                meta[key] = int(value) if value.lstrip("-").isdigit() else value
    return Snapshot(coefficients=coeffs, parameter=parameter, meta=meta)


def parameter_hash(parameter):
    """Stable hash of a parameter vector, used for set-disjointness checks."""
    arr = np.ascontiguousarray(np.asarray(parameter, dtype="<f8"))
    return hashlib.sha256(arr.tobytes()).hexdigest()


def write_set(directory, snapshots, manifest_extra=None):
    """Persist a snapshot list with a manifest of hashes and provenance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hashes = []
    for i, snap in enumerate(snapshots):
        write_snapshot(directory / f"snap_{i:05d}.bin", snap)
        hashes.append(parameter_hash(snap.parameter) if snap.parameter is not None else None)
    manifest = {"count": len(snapshots), "parameter_hashes": hashes}
    manifest.update(manifest_extra or {})
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest


def read_set(directory):
    """Load a persisted snapshot set (sorted by index)."""
    directory = Path(directory)
    files = sorted(directory.glob("snap_*.bin"))
    return [read_snapshot(f) for f in files]


def read_manifest(directory):
    return json.loads((Path(directory) / "manifest.json").read_text())


def write_sensors(path, sensors):
    """Plain-text sensor table: one row per sensor, columns center-x center-y tau."""
    lines = ["# center-x center-y tau"]
    for s in sensors:
        lines.append(f"{s.center[0]!r} {s.center[1]!r} {s.tau!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_sensors(path):
    sensors = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cx, cy, tau = (float(v) for v in line.split())
        sensors.append(Sensor(center=(cx, cy), tau=tau))
    return sensors


def basis_fingerprint(basis):
    """Short hash identifying the ambient basis a map's coordinates refer to."""
    vectors = basis.vectors if hasattr(basis, "vectors") else np.asarray(basis)
    return hashlib.sha256(np.ascontiguousarray(vectors, dtype="<f8").tobytes()).hexdigest()[:16]


def write_map(path, recovery_map, fingerprint=""):
    """Serialize a recovery map: text header, then binary B (row-major) and c."""
    header = (
        f"{MAP_MAGIC}\n"
        f"m {recovery_map.m}\n"
        f"N {recovery_map.n_perp}\n"
        f"fingerprint {fingerprint}\n\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(recovery_map.B, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(recovery_map.c, dtype="<f8").tobytes())


def read_map(path):
    """Load a serialized recovery map; returns (map, fingerprint)."""
    raw = Path(path).read_bytes()
    sep = raw.index(b"\n\n")
    header = raw[:sep].decode("ascii").splitlines()
    if header[0] != MAP_MAGIC:
        raise ValueError(f"{path} is not a recovery map file")
    fields = dict(line.split(" ", 1) for line in header[1:])
    m = int(fields["m"])
    n_perp = int(fields["N"])
    fingerprint = fields.get("fingerprint", "")
    body = raw[sep + 2 :]
    B = np.frombuffer(body[: 8 * n_perp * m], dtype="<f8").reshape(n_perp, m).astype(float)
    c = np.frombuffer(body[8 * n_perp * m : 8 * n_perp * (m + 1)], dtype="<f8").astype(float)
    return AffineRecoveryMap(m=m, n_perp=n_perp, B=B, c=c), fingerprint


def write_table(path, header, rows):
    """CSV table whose float cells round-trip bit-exactly through repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_table(path):
    """Read back a CSV table as (header, rows) with floats parsed."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(int(cell))
                except ValueError:
                    try:
                        row.append(float(cell))
                    except ValueError:
                        row.append(cell)
            rows.append(row)
    return header, rows
