"""File formats: binary snapshots, CSV fallback, model containers, run configs.

Snapshot files ("PMDS") carry a 40-byte little-endian header

    magic "PMDS" | version u32 = 1 | rows u64 | cols u64 | n_spatial u64 | n_time u64

followed by ``cols`` parameter values and the column-major float64 payload.
Model containers ("PMDM") hold named sections, each either a float64 array
(stored column-major with explicit dimensions) or raw bytes; floats
round-trip bit for bit in both formats. All writes go through a temporary
file in the target directory followed by an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
import jsonschema

from .exceptions import (
    BadHeaderError,
    BadMagicError,
    BadVersionError,
    ConfigError,
    SnapshotIOError,
    TruncatedFileError,
    UnsortedParametersError,
)
from .snapshots import ScalingStats, SnapshotMatrix
from .reduction import LinearBasis
from .lifting import LiftingOperator
from .splines import ContinuousLatentMap, SplineFit, build_basis

SNAPSHOT_MAGIC = b"PMDS"
MODEL_MAGIC = b"PMDM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQQQQ")  # 40 bytes


def _atomic_write(path, payload: bytes) -> None:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise SnapshotIOError(f"cannot write {path}: {exc}") from exc


def write_snapshot_file(matrix: SnapshotMatrix, path) -> None:
    """Serialize a snapshot matrix to the binary format (atomically)."""
    n_rows, n_cols = matrix.data.shape
    header = _HEADER.pack(SNAPSHOT_MAGIC, FORMAT_VERSION, n_rows, n_cols,
                          matrix.n_spatial, matrix.n_time)
    params = np.ascontiguousarray(matrix.params, dtype="<f8").tobytes()
    payload = np.asfortranarray(matrix.data.astype("<f8", copy=False)).tobytes(order="F")
    _atomic_write(path, header + params + payload)


def read_snapshot_file(path) -> SnapshotMatrix:
    """Parse a binary snapshot file, validating header and payload sizes."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise TruncatedFileError(f"{path}: {len(blob)} bytes is shorter than the header")
    magic, version, n_rows, n_cols, n_spatial, n_time = _HEADER.unpack_from(blob)
    if magic != SNAPSHOT_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    if n_rows != n_spatial * n_time:
        raise BadHeaderError(
            f"{path}: rows {n_rows} != n_spatial*n_time = {n_spatial * n_time}"
        )
    need = _HEADER.size + 8 * n_cols + 8 * n_rows * n_cols
    if len(blob) < need:
        raise TruncatedFileError(f"{path}: need {need} bytes, file has {len(blob)}")
    offset = _HEADER.size
    params = np.frombuffer(blob, dtype="<f8", count=n_cols, offset=offset).copy()
    offset += 8 * n_cols
    diffs = np.diff(params)
    if np.any(diffs <= 0):
        raise UnsortedParametersError(f"{path}: parameters are not strictly ascending")
    flat = np.frombuffer(blob, dtype="<f8", count=n_rows * n_cols, offset=offset)
    data = flat.reshape((n_rows, n_cols), order="F").copy()
    return SnapshotMatrix(data=data, params=params, n_spatial=int(n_spatial),
                          n_time=int(n_time))


def write_snapshot_csv(matrix: SnapshotMatrix, path) -> None:
    """CSV fallback: header "mu,0,1,...", one row per parameter sample."""
    lines = ["mu," + ",".join(str(i) for i in range(matrix.n_rows))]
    for j in range(matrix.n_samples):
        cells = [repr(float(matrix.params[j]))]
        cells += [repr(float(v)) for v in matrix.data[:, j]]
        lines.append(",".join(cells))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_snapshot_csv(path, n_spatial: int | None = None,
                      n_time: int | None = None) -> SnapshotMatrix:
    """Parse the CSV fallback format.

    The CSV carries no grid split, so n_spatial/n_time must be supplied when
    the rows are genuinely space-time; they default to a single time step.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if not header.startswith("mu,"):
                raise BadHeaderError(f"{path}: CSV header must start with 'mu,'")
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise SnapshotIOError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise BadHeaderError(f"{path}: malformed CSV: {exc}") from exc
    params = table[:, 0].copy()
    data = table[:, 1:].T.copy()
    if np.any(np.diff(params) <= 0):
        raise UnsortedParametersError(f"{path}: parameters are not strictly ascending")
    n = data.shape[0]
    if n_time is None and n_spatial is None:
        n_spatial, n_time = n, 1
    elif n_time is None:
        n_time = n // int(n_spatial)
    elif n_spatial is None:
        n_spatial = n // int(n_time)
    return SnapshotMatrix(data=data, params=params, n_spatial=int(n_spatial),
                          n_time=int(n_time))


# --- named-section container ----------------------------------------------------

def _pack_sections(arrays: dict[str, np.ndarray], blobs: dict[str, bytes]) -> bytes:
    chunks = [MODEL_MAGIC, struct.pack("<IQ", FORMAT_VERSION, len(arrays) + len(blobs))]
    for name, arr in arrays.items():
        encoded = name.encode()
        a = np.asarray(arr, dtype="<f8")
        chunks.append(struct.pack("<Q", len(encoded)))
        chunks.append(encoded)
        chunks.append(b"\x00")  # kind 0: float64 array
        chunks.append(struct.pack("<Q", a.ndim))
        chunks.append(struct.pack(f"<{max(a.ndim, 1)}Q", *(a.shape or (0,))) if a.ndim else b"")
        chunks.append(np.asfortranarray(a).tobytes(order="F"))
    for name, blob in blobs.items():
        encoded = name.encode()
        chunks.append(struct.pack("<Q", len(encoded)))
        chunks.append(encoded)
        chunks.append(b"\x01")  # kind 1: raw bytes
        chunks.append(struct.pack("<Q", len(blob)))
        chunks.append(blob)
    return b"".join(chunks)


def _unpack_sections(blob: bytes, path) -> tuple[dict[str, np.ndarray], dict[str, bytes]]:
    if len(blob) < 16:
        raise TruncatedFileError(f"{path}: too short for a container header")
    if blob[:4] != MODEL_MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    version, count = struct.unpack_from("<IQ", blob, 4)
    if version != FORMAT_VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    arrays: dict[str, np.ndarray] = {}
    blobs: dict[str, bytes] = {}
    offset = 16

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise TruncatedFileError(f"{path}: section data runs past end of file")
        out = blob[offset:offset + n]
        offset += n
        return out

    for _ in range(count):
        (name_len,) = struct.unpack("<Q", take(8))
        name = take(name_len).decode()
        kind = take(1)[0]
        if kind == 0:
            (ndim,) = struct.unpack("<Q", take(8))
            shape = struct.unpack(f"<{ndim}Q", take(8 * ndim)) if ndim else ()
            n_items = int(np.prod(shape)) if shape else 1
            flat = np.frombuffer(take(8 * n_items), dtype="<f8")
            arrays[name] = flat.reshape(shape, order="F").copy() if shape else flat[:1].copy()
        elif kind == 1:
            (length,) = struct.unpack("<Q", take(8))
            blobs[name] = take(length)
        else:
            raise BadHeaderError(f"{path}: unknown section kind {kind}")
    return arrays, blobs


def write_container(path, arrays: dict[str, np.ndarray], blobs: dict[str, bytes] | None = None) -> None:
    _atomic_write(path, _pack_sections(arrays, blobs or {}))


def read_container(path) -> tuple[dict[str, np.ndarray], dict[str, bytes]]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read {path}: {exc}") from exc
    return _unpack_sections(blob, path)


# --- model serialization ---------------------------------------------------------

def _stats_arrays(stats: ScalingStats, arrays: dict) -> None:
    arrays["stats.mean"] = stats.mean
    arrays["stats.scale"] = stats.scale
    arrays["stats.sigma_floor"] = np.array([stats.sigma_floor])


def _stats_from(arrays: dict) -> ScalingStats:
    return ScalingStats(mean=arrays["stats.mean"], scale=arrays["stats.scale"],
                        sigma_floor=float(arrays["stats.sigma_floor"][0]))


def _basis_arrays(basis: LinearBasis, arrays: dict) -> None:
    arrays["basis.modes"] = basis.modes
    arrays["basis.singular_values"] = basis.singular_values
    arrays["basis.right_vectors"] = basis.right_vectors
    arrays["basis.energy_fraction"] = np.array([basis.energy_fraction])


def _basis_from(arrays: dict) -> LinearBasis:
    return LinearBasis(
        modes=arrays["basis.modes"],
        singular_values=arrays["basis.singular_values"],
        right_vectors=arrays["basis.right_vectors"],
        energy_fraction=float(arrays["basis.energy_fraction"][0]),
    )


def _lifting_arrays(lifting: LiftingOperator, arrays: dict) -> None:
    arrays["lifting.anchors"] = lifting.anchors
    arrays["lifting.dual"] = lifting.dual
    arrays["lifting.scalars"] = np.array([lifting.offset, float(lifting.degree), lifting.ridge])


def _lifting_from(arrays: dict) -> LiftingOperator:
    offset, degree, ridge = arrays["lifting.scalars"]
    return LiftingOperator(anchors=arrays["lifting.anchors"], dual=arrays["lifting.dual"],
                           offset=float(offset), degree=int(degree), ridge=float(ridge))


def _latent_map_arrays(prefix: str, latent_map: ContinuousLatentMap, arrays: dict) -> None:
    arrays[f"{prefix}.locations"] = latent_map.fits[0].basis.locations
    arrays[f"{prefix}.coefficients"] = np.vstack([f.coefficients for f in latent_map.fits])
    arrays[f"{prefix}.alphas"] = latent_map.alphas


def _latent_map_from(prefix: str, arrays: dict) -> ContinuousLatentMap:
    basis = build_basis(arrays[f"{prefix}.locations"])
    coeffs = arrays[f"{prefix}.coefficients"]
    alphas = arrays[f"{prefix}.alphas"]
    fits = [SplineFit(basis=basis, coefficients=coeffs[i].copy(), alpha=float(alphas[i]))
            for i in range(coeffs.shape[0])]
    return ContinuousLatentMap(fits=fits, alphas=alphas.copy())


def save_model(model, path) -> None:
    """Serialize any fitted model to a named-section container."""
    from .baseline import PodGprModel
    from .pipeline import PpmdModel
    from .temporal import TemporalModel

    arrays: dict[str, np.ndarray] = {}
    meta: dict = {}
    if isinstance(model, PpmdModel):
        meta = {"kind": "ppmd", "n_spatial": model.n_spatial, "n_time": model.n_time,
                "provenance": model.provenance}
        _stats_arrays(model.stats, arrays)
        _basis_arrays(model.basis, arrays)
        _lifting_arrays(model.lifting, arrays)
        _latent_map_arrays("coord_map", model.coord_map, arrays)
        _latent_map_arrays("embed_map", model.embed_map, arrays)
        arrays["domain"] = np.array(model.domain)
        arrays["train_params"] = model.train_params
    elif isinstance(model, PodGprModel):
        meta = {"kind": "pod-gpr", "n_spatial": model.n_spatial, "n_time": model.n_time}
        _stats_arrays(model.stats, arrays)
        _basis_arrays(model.basis, arrays)
        arrays["train_params"] = model.train_params
        arrays["row_means"] = model.row_means
        arrays["gp_alphas"] = model.gp_alphas
        arrays["length_scales"] = model.length_scales
        arrays["signal_vars"] = model.signal_vars
        arrays["jitter"] = np.array([model.jitter])
    elif isinstance(model, TemporalModel):
        meta = {"kind": "pmd", "n_spatial": model.n_spatial, "n_time": model.n_time}
        _stats_arrays(model.stats, arrays)
        _basis_arrays(model.basis, arrays)
        _lifting_arrays(model.lifting, arrays)
        arrays["coords"] = model.coords
        arrays["embeddings"] = model.embeddings
        arrays["linear.matrix"] = model.linear.matrix
        arrays["linear.ridge"] = np.array([model.linear.ridge])
        m = model.manifold
        arrays["manifold.anchors"] = m.anchors
        arrays["manifold.geodesics"] = m.geodesics
        arrays["manifold.degrees"] = m.degrees
        arrays["manifold.harmonics"] = m.harmonics
        arrays["manifold.eigenvalues"] = m.eigenvalues
        arrays["manifold.coeffs"] = m.coeffs
        arrays["manifold.omega"] = m.omega
        arrays["manifold.scalars"] = np.array([m.bandwidth, m.ridge, m.floor])
        arrays["times"] = model.times
    else:
        raise ConfigError(f"cannot serialize object of type {type(model).__name__}")
    blobs = {"meta": json.dumps(meta, sort_keys=True).encode()}
    write_container(path, arrays, blobs)


def load_model(path):
    """Load any model container written by :func:`save_model`."""
    from .baseline import PodGprModel
    from .pipeline import PpmdModel
    from .temporal import LinearDynamics, ManifoldDynamics, TemporalModel

    arrays, blobs = read_container(path)
    if "meta" not in blobs:
        raise BadHeaderError(f"{path}: container has no meta section")
    meta = json.loads(blobs["meta"].decode())
    kind = meta.get("kind")
    if kind == "ppmd":
        domain = arrays["domain"]
        return PpmdModel(
            stats=_stats_from(arrays),
            basis=_basis_from(arrays),
            lifting=_lifting_from(arrays),
            coord_map=_latent_map_from("coord_map", arrays),
            embed_map=_latent_map_from("embed_map", arrays),
            domain=(float(domain[0]), float(domain[1])),
            n_spatial=int(meta["n_spatial"]),
            n_time=int(meta["n_time"]),
            train_params=arrays["train_params"],
            provenance=meta.get("provenance", {}),
        )
    if kind == "pod-gpr":
        return PodGprModel(
            stats=_stats_from(arrays),
            basis=_basis_from(arrays),
            train_params=arrays["train_params"],
            row_means=arrays["row_means"],
            gp_alphas=arrays["gp_alphas"],
            length_scales=arrays["length_scales"],
            signal_vars=arrays["signal_vars"],
            jitter=float(arrays["jitter"][0]),
            n_spatial=int(meta["n_spatial"]),
            n_time=int(meta["n_time"]),
        )
    if kind == "pmd":
        bandwidth, ridge, floor = arrays["manifold.scalars"]
        manifold = ManifoldDynamics(
            anchors=arrays["manifold.anchors"],
            geodesics=arrays["manifold.geodesics"],
            bandwidth=float(bandwidth),
            degrees=arrays["manifold.degrees"],
            harmonics=arrays["manifold.harmonics"],
            eigenvalues=arrays["manifold.eigenvalues"],
            coeffs=arrays["manifold.coeffs"],
            omega=arrays["manifold.omega"],
            ridge=float(ridge),
            floor=float(floor),
        )
        return TemporalModel(
            stats=_stats_from(arrays),
            basis=_basis_from(arrays),
            lifting=_lifting_from(arrays),
            coords=arrays["coords"],
            embeddings=arrays["embeddings"],
            linear=LinearDynamics(matrix=arrays["linear.matrix"],
                                  ridge=float(arrays["linear.ridge"][0])),
            manifold=manifold,
            times=arrays["times"],
            n_spatial=int(meta["n_spatial"]),
            n_time=int(meta["n_time"]),
        )
    raise BadHeaderError(f"{path}: unknown model kind {kind!r}")


def write_text(path, text: str) -> None:
    """Atomic text write for reports."""
    _atomic_write(path, text.encode())


# --- run configuration ------------------------------------------------------------

_POSITIVE_INT = {"type": "integer", "minimum": 1}
_NONNEG_NUMBER = {"type": "number", "minimum": 0}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "input": {"type": "string"},
        "output": {"type": "string"},
        "model": {"type": "string"},
        "method": {"enum": ["ppmd", "pmd", "pod-gpr"]},
        "seed": {"type": "integer", "minimum": 0},
        "test_count": {"type": "integer", "minimum": 0},
        "extrapolate": {"type": "boolean"},
        "csv_n_spatial": _POSITIVE_INT,
        "csv_n_time": _POSITIVE_INT,
        "generate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["separable", "traveling"]},
                "n_spatial": _POSITIVE_INT,
                "n_time": _POSITIVE_INT,
                "mu_min": {"type": "number"},
                "mu_max": {"type": "number"},
                "n_params": _POSITIVE_INT,
            },
            "required": ["family", "n_spatial", "n_time", "mu_min", "mu_max", "n_params"],
        },
        "ppmd": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "energy_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "rank": _POSITIVE_INT,
                "embed_dim": _POSITIVE_INT,
                "n_neighbors": _POSITIVE_INT,
                "diffusion_power": _POSITIVE_INT,
                "bandwidth": {"type": "number", "exclusiveMinimum": 0},
                "degree_grid": {"type": "array", "items": _POSITIVE_INT, "minItems": 1},
                "offset_grid": {"type": "array", "items": _NONNEG_NUMBER, "minItems": 1},
                "ridge_grid": {"type": "array", "items": _NONNEG_NUMBER, "minItems": 1},
                "refresh_period": {"type": "integer", "minimum": 0},
                "forecast_steps": {"type": "integer", "minimum": 0},
                "alpha_grid": {"type": "array", "items": _NONNEG_NUMBER, "minItems": 1},
                "cv_folds": {"type": "integer", "minimum": 2},
                "predicted_weight": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "lifting_offset": _NONNEG_NUMBER,
                "lifting_degree": _POSITIVE_INT,
                "lifting_ridge": _NONNEG_NUMBER,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "pod_gpr": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rank": _POSITIVE_INT,
                "jitter": {"type": "number", "exclusiveMinimum": 0},
                "optimize_length_scale": {"type": "boolean"},
            },
        },
        "pmd": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "energy_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "rank": _POSITIVE_INT,
                "embed_dim": _POSITIVE_INT,
                "n_neighbors": _POSITIVE_INT,
                "diffusion_power": _POSITIVE_INT,
                "bandwidth": {"type": "number", "exclusiveMinimum": 0},
                "dynamics_bandwidth": {"type": "number", "exclusiveMinimum": 0},
                "ridge": _NONNEG_NUMBER,
                "lifting_offset": _NONNEG_NUMBER,
                "lifting_degree": _POSITIVE_INT,
                "lifting_ridge": _NONNEG_NUMBER,
                "harmonic_floor": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "predict": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"param": {"type": "number"}},
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "methods": {
                    "type": "array",
                    "items": {"enum": ["ppmd", "pmd", "pod-gpr"]},
                    "minItems": 2,
                    "maxItems": 2,
                },
            },
            "required": ["methods"],
        },
        "rate_check": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "state_dim": _POSITIVE_INT,
                "sample_sizes": {"type": "array", "items": {"type": "integer", "minimum": 2},
                                 "minItems": 2},
                "trials": _POSITIVE_INT,
                "amplitude": _NONNEG_NUMBER,
            },
        },
    },
}


def load_run_config(path) -> dict:
    """Read and schema-validate a JSON run configuration."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_run_config(config)
    return config


def validate_run_config(config: dict) -> dict:
    try:
        jsonschema.validate(config, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        location = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {location}: {exc.message}") from exc
    return config
