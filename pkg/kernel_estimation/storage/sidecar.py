"""Resolved-configuration sidecars written next to every artifact."""

from pathlib import Path
from typing import Any, Dict, Mapping, Union

from kernel_estimation.config import load_key_value_file

PathLike = Union[str, Path]
SIDECAR_SUFFIX = ".cfg"


def sidecar_path(artifact: PathLike) -> Path:
    """``out.pgm`` → ``out.pgm.cfg``."""
    path = Path(artifact)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def _format(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sidecar(artifact: PathLike, values: Mapping[str, Any], comment: str = "") -> Path:
    """
    Write ``key=value`` lines describing how ``artifact`` was produced.

    Keys are written in sorted order so identical configurations give
    identical files.
    """
    target = sidecar_path(artifact)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {comment}"] if comment else []
    lines.extend(f"{key}={_format(values[key])}" for key in sorted(values) if values[key] is not None)
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target


def read_sidecar(artifact: PathLike) -> Dict[str, str]:
    """Read the sidecar of ``artifact``."""
    return load_key_value_file(sidecar_path(artifact))
