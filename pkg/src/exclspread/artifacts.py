"""CSV/JSON writers and the run manifest.

Everything written here is a pure function of its inputs: floats go out via
``repr``, JSON keys are sorted, and nothing time- or host-dependent enters a
file, so a rerun with the same configuration and seed is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "write_json", "canonical_json", "config_hash", "file_sha256",
           "versions", "write_manifest"]


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    """RFC 4180 quoting, LF line endings, '.' decimal point."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=True) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj), encoding="utf-8")
    return path


def config_hash(config):
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=_default).encode()).hexdigest()


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def versions():
    import numpy
    import scipy

    from . import __version__
    from ._jit import backend_name, numba

    return {
        "exclspread": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "numba": getattr(numba, "__version__", None),
        "backend": backend_name(),
    }


def write_manifest(out_dir, config, seeds, files):
    """``manifest.json`` listing every produced file with its content hash."""
    out_dir = Path(out_dir)
    entries = []
    for f in sorted(Path(p) for p in files):
        entries.append({"path": f.relative_to(out_dir).as_posix(), "sha256": file_sha256(f),
                        "bytes": f.stat().st_size})
    manifest = {"config_sha256": config_hash(config), "config": config, "seeds": seeds,
                "versions": versions(), "files": entries}
    return write_json(out_dir / "manifest.json", manifest)
