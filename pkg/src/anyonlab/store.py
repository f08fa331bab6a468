"""Artifact persistence: config echo, metadata, CSV series, raw field dumps.

Fields are stored as little-endian IEEE-754 complex128 (interleaved
real/imaginary float64, C order) next to a JSON sidecar carrying the
shape and the config hash; the round trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

FFT_CONVENTION = ("forward unnormalized, inverse divided by point count; "
                  "discrete convolutions carry an h^2 weight")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    """Hash of the experiment identity: output location and thread count
    do not change what is computed and are excluded."""
    ident = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    return hashlib.sha256(canonical_json(ident).encode()).hexdigest()


class ArtifactStore:
    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        os.makedirs(run_dir, exist_ok=True)
        self._config_hash = None

    def path(self, name: str) -> str:
        return os.path.join(self.run_dir, name)

    def write_json(self, name: str, obj) -> str:
        p = self.path(name)
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return p

    def write_config(self, normalized: dict) -> str:
        self._config_hash = config_hash(normalized)
        self.write_json("config.json", normalized)
        return self._config_hash

    def write_meta(self, version: str, timings: dict | None = None,
                   warnings_list=None, extra: dict | None = None) -> str:
        meta = {
            "code_version": version,
            "fft_convention": FFT_CONVENTION,
            "config_hash": self._config_hash,
            "timings": timings or {},
            "warnings": list(warnings_list or []),
        }
        if extra:
            meta.update(extra)
        return self.write_json("meta.json", meta)

    def write_diagnostics(self, columns, rows, name: str = "diagnostics.csv"
                          ) -> str:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            if self._config_hash:
                fh.write(f"# config_hash={self._config_hash}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        return p

    def save_field(self, name: str, values: np.ndarray) -> str:
        data = np.ascontiguousarray(values, dtype="<c16")
        bin_path = self.path(name + ".bin")
        with open(bin_path, "wb") as fh:
            fh.write(data.tobytes())
        self.write_json(name + ".json", {
            "shape": list(values.shape),
            "dtype": "complex128",
            "byte_order": "little",
            "layout": "interleaved real/imag float64, C order",
            "config_hash": self._config_hash,
        })
        return bin_path

    def load_field(self, name: str) -> np.ndarray:
        with open(self.path(name + ".json"), "r", encoding="utf-8") as fh:
            side = json.load(fh)
        raw = np.fromfile(self.path(name + ".bin"), dtype="<c16")
        return raw.reshape(side["shape"]).astype(complex, copy=False)


def load_field_file(bin_path: str) -> np.ndarray:
    """Load a field given the path to its .bin (sidecar alongside)."""
    side_path = bin_path[:-4] + ".json" if bin_path.endswith(".bin") \
        else bin_path + ".json"
    with open(side_path, "r", encoding="utf-8") as fh:
        side = json.load(fh)
    raw = np.fromfile(bin_path, dtype="<c16")
    return raw.reshape(side["shape"]).astype(complex, copy=False)
