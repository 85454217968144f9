"""Key-value configuration files and grid specifications."""

from __future__ import annotations

import configparser
from pathlib import Path

import numpy as np

MODEL_KEYS = {"sigma0": float, "eta": float, "rho": float, "H": float, "theta": float}
MC_KEYS = {"n_paths": int, "n_steps": int, "seed": int, "scheme": str, "antithetic": "bool"}
_SECTION = "config"


def read_config(path) -> dict:
    """Parse ``key=value`` lines (``#`` comments allowed) into typed values.

    Only the model keys ``sigma0, eta, rho, H, theta`` and the simulation keys
    ``n_paths, n_steps, seed, scheme, antithetic`` are accepted.
    """
    text = Path(path).read_text()
    cp = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    cp.read_string(f"[{_SECTION}]\n{text}")
    out = {}
    for key, raw in cp[_SECTION].items():
        if key in MODEL_KEYS:
            out[key] = MODEL_KEYS[key](raw)
        elif key in MC_KEYS:
            kind = MC_KEYS[key]
            out[key] = cp[_SECTION].getboolean(key) if kind == "bool" else kind(raw)
        else:
            raise ValueError(f"{path}: unknown key {key!r}")
    return out


def parse_grid(spec: str) -> np.ndarray:
    """``"a:b:n"`` to ``n`` equally spaced points from ``a`` to ``b``.

    A bare number is a single point and ``"a,b,c"`` an explicit increasing list.
    """
    if "," in spec:
        vals = np.array(parse_list(spec))
        if np.any(np.diff(vals) <= 0):
            raise ValueError(f"grid {spec!r} is not strictly increasing")
        return vals
    parts = spec.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise ValueError(f"grid {spec!r} is not of the form a:b:n")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError(f"grid {spec!r} is empty")
    if n == 1:
        return np.array([a])
    if not b > a:
        raise ValueError(f"grid {spec!r} is not strictly increasing")
    return np.linspace(a, b, n)


def parse_list(spec: str) -> list:
    """Comma-separated floats."""
    vals = [float(v) for v in spec.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals
