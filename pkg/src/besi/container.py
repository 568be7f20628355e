"""Binary and CSV serialization of the core types.

Binary container layout (all integers and floats little-endian):

    offset  size  field
    0       4     magic ``b"BESI"``
    4       1     format version (currently 1)
    5       1     payload kind: 1 = lead field, 2 = source space, 3 = measurement
    6       2     reserved (zero)
    8       ...   kind-specific payload

Payloads (u64 = unsigned 64-bit int, f64 = IEEE-754 double, row-major):

* lead field:    u64 m, u64 n, u64 d, then m*(d*n) f64 entries
* source space:  u64 n, u64 d, then n*3 f64 positions (mm), n f64 depths (mm),
                 n*d*3 f64 orientation basis
* measurement:   u64 m, then m f64 values, m f64 noise mean,
                 m*m f64 noise covariance

CSV companions keep the same numbers in text form for interoperability;
shape metadata rides in a leading ``#``-comment line where needed.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .model import LeadField, Measurement, NoiseModel, SourceEstimate, SourceSpace

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "save_binary",
    "load_binary",
    "lead_field_to_csv",
    "lead_field_from_csv",
    "source_space_to_json",
    "source_space_from_json",
    "measurement_to_csv",
    "measurement_from_csv",
    "estimate_to_csv",
    "estimate_from_csv",
]

MAGIC = b"BESI"
FORMAT_VERSION = 1

_KIND_LEADFIELD = 1
_KIND_SOURCESPACE = 2
_KIND_MEASUREMENT = 3

_HEADER = struct.Struct("<4sBBH")


def _pack_u64(*values) -> bytes:
    return struct.pack(f"<{len(values)}Q", *values)


def _f64(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_binary(obj, path) -> None:
    """Write a LeadField, SourceSpace or Measurement to a container file."""
    buf = io.BytesIO()
    if isinstance(obj, LeadField):
        kind = _KIND_LEADFIELD
        buf.write(_pack_u64(obj.m, obj.n, obj.d))
        buf.write(_f64(obj.entries))
    elif isinstance(obj, SourceSpace):
        kind = _KIND_SOURCESPACE
        buf.write(_pack_u64(obj.n, obj.d))
        buf.write(_f64(obj.positions))
        buf.write(_f64(obj.depths))
        buf.write(_f64(obj.orientation_basis))
    elif isinstance(obj, Measurement):
        kind = _KIND_MEASUREMENT
        buf.write(_pack_u64(obj.values.size))
        buf.write(_f64(obj.values))
        buf.write(_f64(obj.noise.mean))
        buf.write(_f64(obj.noise.covariance))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, kind, 0))
        fh.write(buf.getvalue())


def _read_f64(fh, count) -> np.ndarray:
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise ConfigError("container truncated")
    return np.frombuffer(raw, dtype="<f8").astype(float)


def _read_u64(fh, count) -> tuple:
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise ConfigError("container truncated")
    return struct.unpack(f"<{count}Q", raw)


def load_binary(path):
    """Read a container file back into its domain type."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigError(f"{path}: not a BESI container (file too short)")
        magic, version, kind, _reserved = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ConfigError(f"{path}: bad magic bytes {magic!r}")
        if version != FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported container version {version}")
        if kind == _KIND_LEADFIELD:
            m, n, d = _read_u64(fh, 3)
            entries = _read_f64(fh, m * n * d).reshape(m, n * d)
            return LeadField(entries=entries, n=int(n), d=int(d))
        if kind == _KIND_SOURCESPACE:
            n, d = _read_u64(fh, 2)
            positions = _read_f64(fh, n * 3).reshape(n, 3)
            depths = _read_f64(fh, n)
            basis = _read_f64(fh, n * d * 3).reshape(n, d, 3)
            return SourceSpace(positions=positions, depths=depths, orientation_basis=basis)
        if kind == _KIND_MEASUREMENT:
            (m,) = _read_u64(fh, 1)
            values = _read_f64(fh, m)
            mean = _read_f64(fh, m)
            cov = _read_f64(fh, m * m).reshape(m, m)
            return Measurement(values=values, noise=NoiseModel(mean=mean, covariance=cov))
        raise ConfigError(f"{path}: unknown payload kind {kind}")


def lead_field_to_csv(lf: LeadField, path) -> None:
    """Matrix CSV with an ``# m= n= d=`` metadata comment line."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# besi-leadfield m={lf.m} n={lf.n} d={lf.d}\n")
        writer = csv.writer(fh)
        for row in lf.entries:
            writer.writerow([repr(float(v)) for v in row])


def lead_field_from_csv(path) -> LeadField:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# besi-leadfield"):
            raise ConfigError(f"{path}: missing lead-field metadata line")
        meta = dict(tok.split("=") for tok in header.split()[2:])
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    entries = np.array(rows, dtype=float)
    return LeadField(entries=entries, n=int(meta["n"]), d=int(meta["d"]))


def source_space_to_json(space: SourceSpace, path) -> None:
    payload = {
        "n": space.n,
        "d": space.d,
        "positions_mm": space.positions.tolist(),
        "depths_mm": space.depths.tolist(),
        "orientation_basis": space.orientation_basis.tolist(),
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def source_space_from_json(path) -> SourceSpace:
    try:
        payload = json.loads(Path(path).read_text())
        return SourceSpace(
            positions=np.array(payload["positions_mm"], dtype=float),
            depths=np.array(payload["depths_mm"], dtype=float),
            orientation_basis=np.array(payload["orientation_basis"], dtype=float),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: invalid source-space JSON ({exc})") from exc


def measurement_to_csv(meas: Measurement, path) -> None:
    """Channel table (value, noise mean) plus covariance rows below a marker."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "noise_mean"])
        for v, mu in zip(meas.values, meas.noise.mean):
            writer.writerow([repr(float(v)), repr(float(mu))])
        writer.writerow(["# covariance"])
        for row in meas.noise.covariance:
            writer.writerow([repr(float(v)) for v in row])


def estimate_to_csv(est, path, metadata=None) -> None:
    """Coefficient column with a ``# besi-estimate`` metadata comment line.

    ``metadata`` values must not contain whitespace; they round-trip as
    strings through :func:`estimate_from_csv`.
    """
    meta = {"d": est.d}
    meta.update(metadata or {})
    tokens = " ".join(f"{k}={v}" for k, v in meta.items())
    with open(path, "w", newline="") as fh:
        fh.write(f"# besi-estimate {tokens}\n")
        fh.write("coefficient\n")
        for v in est.coefficients:
            fh.write(repr(float(v)) + "\n")


def estimate_from_csv(path):
    """Returns (SourceEstimate, metadata dict of strings)."""
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# besi-estimate"):
            raise ConfigError(f"{path}: missing estimate metadata line")
        meta = dict(tok.split("=", 1) for tok in header.split()[2:])
        column = fh.readline().strip()
        if column != "coefficient":
            raise ConfigError(f"{path}: missing coefficient column header")
        coeffs = np.array([float(line) for line in fh if line.strip()])
    est = SourceEstimate(coefficients=coeffs, d=int(meta.pop("d")))
    return est, meta


def measurement_from_csv(path) -> Measurement:
    values, means, cov_rows = [], [], []
    in_cov = False
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["value", "noise_mean"]:
            raise ConfigError(f"{path}: missing measurement header")
        for row in reader:
            if not row:
                continue
            if row[0].startswith("# covariance"):
                in_cov = True
                continue
            if in_cov:
                cov_rows.append([float(v) for v in row])
            else:
                values.append(float(row[0]))
                means.append(float(row[1]))
    noise = NoiseModel(mean=np.array(means), covariance=np.array(cov_rows))
    return Measurement(values=np.array(values), noise=noise)
