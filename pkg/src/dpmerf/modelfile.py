"""Versioned binary model file.

Layout (all integers little-endian)::

    8 bytes   magic b"DPMERF\\x00\\x00"
    uint32    format version
    uint64    header length in bytes
    header    UTF-8 JSON (sorted keys): feature-map header (d, D, bandwidth,
              seed, prng), schema, architecture, label distribution, release
              metadata (sensitivity, sigma, epsilon, delta, seeds), run config
              and the list of arrays that follow
    arrays    float64 little-endian, row-major, in header order:
              feature-map frequencies (D/2 x d), generator parameters
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .data import Schema
from .errors import ModelVersionError
from .featuremap import PRNG_NAME, PRNG_VERSION, FeatureMap
from .generator import Architecture, GeneratorParams

MAGIC = b"DPMERF\x00\x00"
FORMAT_VERSION = 1


class InvalidModelFile(ValueError):
    pass


@dataclass(frozen=True)
class ModelBundle:
    fmap: FeatureMap
    params: GeneratorParams
    schema: Schema
    label_distribution: tuple
    release: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def dumps(bundle: ModelBundle) -> bytes:
    fmap = bundle.fmap
    arrays = [("frequencies", fmap.frequencies), ("theta", bundle.params.theta)]
    header = {
        "feature_map": {"d": fmap.input_dim, "D": fmap.num_features,
                        "bandwidth": fmap.bandwidth, "seed": fmap.seed,
                        "prng": PRNG_NAME, "prng_version": PRNG_VERSION},
        "schema": bundle.schema.to_dict(),
        "architecture": bundle.params.arch.to_dict(),
        "label_distribution": [float(p) for p in bundle.label_distribution],
        "release": bundle.release,
        "config": bundle.config,
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(head)) + head + body


def loads(blob: bytes) -> ModelBundle:
    start = 8 + struct.calcsize("<IQ")
    if blob[:8] != MAGIC or len(blob) < start:
        raise InvalidModelFile("not a model file (bad magic)")
    version, head_len = struct.unpack_from("<IQ", blob, 8)
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model file version {version}, this build reads {FORMAT_VERSION}")
    try:
        header = json.loads(blob[start:start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidModelFile(f"corrupt model header: {exc}") from None
    pos = start + head_len
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        if pos + 8 * count > len(blob):
            raise InvalidModelFile("model file is truncated")
        arrays[spec["name"]] = np.frombuffer(blob, dtype="<f8", count=count,
                                             offset=pos).reshape(spec["shape"]).astype(np.float64)
        pos += 8 * count
    if pos != len(blob):
        raise InvalidModelFile("trailing or missing bytes in model file")
    fm = header["feature_map"]
    if fm.get("prng") != PRNG_NAME or fm.get("prng_version") != PRNG_VERSION:
        raise ModelVersionError(f"model was built with PRNG {fm.get('prng')} v{fm.get('prng_version')}")
    fmap = FeatureMap(arrays["frequencies"], fm["bandwidth"], fm["seed"])
    arch = Architecture(**header["architecture"])
    return ModelBundle(fmap, GeneratorParams(arch, arrays["theta"]),
                       Schema.from_dict(header["schema"]),
                       tuple(header["label_distribution"]), header["release"], header["config"])


def save(path, bundle: ModelBundle) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(bundle))


def load(path) -> ModelBundle:
    with open(path, "rb") as fh:
        return loads(fh.read())
