import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import OutputError, ParameterError

TOOL_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


def _atomic_write(path: PathLike, payload: bytes) -> Path:
    """Write to a sibling temp file, then rename over the target."""
    path = Path(path)
    try:
        os.makedirs(path.parent, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def to_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"


def save_csv(array: np.ndarray, header: str, path: PathLike) -> Path:
    """Single header line, ',' separated, 17 significant digits."""
    array = np.asarray(array)
    if array.ndim == 1:
        array = array[:, None]
    fmt = "%d" if np.issubdtype(array.dtype, np.integer) else "%.17g"
    buf = io.BytesIO()
    np.savetxt(buf, array, fmt=fmt, delimiter=",", header=header, comments="", encoding="utf-8")
    return _atomic_write(path, buf.getvalue())


def save_json(data, path: PathLike) -> Path:
    return _atomic_write(path, to_json(data).encode("utf-8"))


def save_text(text: str, path: PathLike) -> Path:
    return _atomic_write(path, text.encode("utf-8"))


def save_binary(array: np.ndarray, path: PathLike) -> Path:
    """Raw little-endian float64."""
    return _atomic_write(path, np.ascontiguousarray(array, dtype="<f8").tobytes())


def load_config(path: PathLike) -> dict:
    """Read a JSON object of flag values; keys may use '-' or '_'."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParameterError(f"config file {path} must hold a JSON object")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


@dataclass
class RunManifest:
    command: str
    parameters: Dict[str, object]
    seed: Optional[int] = None
    tool_version: str = TOOL_VERSION
    realized_tn: Optional[float] = None
    output_paths: List[str] = field(default_factory=list)
    timestamp: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def write_manifest(
    out_dir: PathLike,
    command: str,
    parameters: Dict[str, object],
    output_paths: Sequence[PathLike],
    seed: Optional[int] = None,
    realized_tn: Optional[float] = None,
) -> Path:
    """One manifest per run, next to its outputs."""
    out_dir = Path(out_dir)
    manifest = RunManifest(
        command=command,
        parameters=dict(parameters),
        seed=seed,
        realized_tn=realized_tn,
        output_paths=sorted(Path(p).name for p in output_paths),
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    return save_json(manifest.as_dict(), out_dir / MANIFEST_NAME)
