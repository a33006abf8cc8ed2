"""Binary model files.

Layout (all integers little-endian)::

    b"RFCN"  u16 version  u8 component  u32 n  descriptor (n bytes JSON)
    payload: every parameter as float64, in descriptor order
    u32 CRC-32 of everything before it

The JSON descriptor holds the architecture config and the name and shape of
each parameter. It is written with sorted keys so files are byte-stable.
"""

import json
import struct
import zlib

import numpy as np

from rfcnn import __version__
from rfcnn.autograd import Parameter
from rfcnn.classifier import ClassifierConfig, StrabNet, trace_shapes
from rfcnn.detection.model import Detector, DetectorConfig
from rfcnn.errors import FormatError

MAGIC = b"RFCN"
FORMAT_VERSION = 1
COMPONENTS = {"detector": 0, "classifier": 1}
_COMPONENT_NAMES = {v: k for k, v in COMPONENTS.items()}
_HEAD = struct.Struct("<4sHBI")


def encode_model(component, config, params):
    if component not in COMPONENTS:
        raise ValueError(f"unknown component {component!r}")
    descriptor = {
        "component": component,
        "config": config,
        "params": [[p.name, list(p.data.shape)] for p in params],
    }
    desc = json.dumps(descriptor, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p.data, dtype="<f8").tobytes() for p in params)
    body = _HEAD.pack(MAGIC, FORMAT_VERSION, COMPONENTS[component], len(desc)) + desc + payload
    return body + struct.pack("<I", zlib.crc32(body))


def decode_model(blob):
    """``(component, config dict, [Parameter])`` from file bytes."""
    if len(blob) < _HEAD.size + 4:
        raise FormatError("model file truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    magic, version, tag, n_desc = _HEAD.unpack_from(body)
    if magic != MAGIC:
        raise FormatError("not a model file (bad magic)")
    if zlib.crc32(body) != crc:
        raise FormatError("model file checksum mismatch")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version}")
    if tag not in _COMPONENT_NAMES:
        raise FormatError(f"unknown component tag {tag}")
    start = _HEAD.size
    try:
        descriptor = json.loads(body[start:start + n_desc].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad architecture descriptor: {exc}") from None
    if descriptor.get("component") != _COMPONENT_NAMES[tag]:
        raise FormatError("component tag disagrees with descriptor")
    offset = start + n_desc
    params = []
    for name, shape in descriptor["params"]:
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(body):
            raise FormatError("parameter payload truncated")
        data = np.frombuffer(body[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        params.append(Parameter(data, name=name))
        offset = end
    if offset != len(body):
        raise FormatError("trailing bytes after parameter payload")
    return _COMPONENT_NAMES[tag], descriptor["config"], params


def save_model(path, model):
    component = "detector" if isinstance(model, Detector) else "classifier"
    blob = encode_model(component, model.cfg.to_dict(), model.params)
    with open(path, "wb") as fh:
        fh.write(blob)
    return blob


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def load_model(path, expect=None):
    """Rebuild a Detector or StrabNet from ``path``."""
    component, config, params = decode_model(_read(path))
    if expect is not None and component != expect:
        raise FormatError(f"{path} holds a {component}, expected a {expect}")
    if component == "detector":
        return Detector(DetectorConfig.from_dict(config), params)
    cfg = ClassifierConfig.from_dict(config)
    trace_shapes(cfg)
    return StrabNet(cfg, params)


def model_version(*paths):
    """Short identifier of a set of model files: package version plus a CRC of their bytes."""
    crc = 0
    for path in paths:
        crc = zlib.crc32(_read(path), crc)
    return f"{__version__}+{crc:08x}"
