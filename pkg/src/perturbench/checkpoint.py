"""Model checkpoints: text header + raw little-endian float64 payload.

Header lines are ``key: value`` pairs terminated by one blank line, then the
parameter payload follows in manifest order. The manifest records byte
offsets so the payload layout is fully self-describing; spans must tile the
payload exactly or loading fails with a corruption error. Round trips are
bitwise lossless.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import CorruptionError, FormatError
from .models import Model, ModelConfig, _param_specs
from .autograd import Tensor

FORMAT_VERSION = "perturbench-ckpt/1"


def _encode_tuple(values):
    return ",".join(str(v) for v in values)


def _decode_ints(text):
    return tuple(int(v) for v in text.split(",")) if text else ()


def save_checkpoint(model, path, metadata=None):
    """Write config, metadata, manifest, and exact parameter bytes."""
    cfg = model.config
    lines = [
        FORMAT_VERSION,
        f"family: {cfg.family}",
        f"input_shape: {_encode_tuple(cfg.input_shape)}",
        f"num_classes: {cfg.num_classes}",
        f"stage_widths: {_encode_tuple(cfg.stage_widths)}",
        f"num_modules: {cfg.num_modules}",
        f"aux_positions: {_encode_tuple(cfg.aux_positions)}",
        f"aux_loss_weight: {cfg.aux_loss_weight!r}",
    ]
    for key, value in (metadata or {}).items():
        lines.append(f"meta.{key}: {value}")
    offset = 0
    payload = []
    for name, p in model.params.items():
        raw = np.ascontiguousarray(p.data, dtype="<f8").tobytes()
        lines.append(f"param: {name} {_encode_tuple(p.data.shape)} {offset}")
        payload.append(raw)
        offset += len(raw)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n\n").encode())
        for raw in payload:
            fh.write(raw)


def load_checkpoint(path, with_metadata=False):
    """Rebuild the model (bitwise-identical parameters) from a checkpoint."""
    blob = Path(path).read_bytes()
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise FormatError(f"{path}: missing blank line terminating the header")
    header = blob[:sep].decode("utf-8", errors="replace").splitlines()
    payload = blob[sep + 2 :]
    if not header or header[0] != FORMAT_VERSION:
        found = header[0] if header else "<empty>"
        raise FormatError(f"{path}: unsupported format {found!r} (expected {FORMAT_VERSION})")
    fields = {}
    metadata = {}
    manifest = []
    for line in header[1:]:
        key, _, value = line.partition(": ")
        if key == "param":
            try:
                name, shape_text, offset_text = value.rsplit(" ", 2)
                manifest.append((name, _decode_ints(shape_text), int(offset_text)))
            except ValueError as exc:
                raise FormatError(f"{path}: malformed manifest line {line!r}") from exc
        elif key.startswith("meta."):
            metadata[key[5:]] = value
        else:
            fields[key] = value
    try:
        config = ModelConfig(
            family=fields["family"],
            input_shape=_decode_ints(fields["input_shape"]),
            num_classes=int(fields["num_classes"]),
            stage_widths=_decode_ints(fields["stage_widths"]),
            num_modules=int(fields["num_modules"]),
            aux_positions=_decode_ints(fields["aux_positions"]),
            aux_loss_weight=float(fields["aux_loss_weight"]),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete or malformed config header: {exc}") from exc
    config.validate()
    # parameter names/shapes are a pure function of config; enforce it
    expected_specs = [(name, shape) for name, shape, _ in _param_specs(config)]
    if [(name, shape) for name, shape, _ in manifest] != expected_specs:
        raise CorruptionError(f"{path}: manifest does not match the declared architecture")

    params = {}
    expected = 0
    for name, shape, offset in manifest:
        if offset != expected:
            raise CorruptionError(
                f"{path}: parameter {name} at offset {offset}, expected {expected}"
            )
        size = int(np.prod(shape)) * 8
        raw = payload[offset : offset + size]
        if len(raw) != size:
            raise CorruptionError(f"{path}: payload truncated inside parameter {name}")
        params[name] = Tensor(
            np.frombuffer(raw, dtype="<f8").reshape(shape).copy(), requires_grad=True
        )
        expected = offset + size
    if expected != len(payload):
        raise CorruptionError(
            f"{path}: payload has {len(payload)} bytes, manifest covers {expected}"
        )
    model = Model(config, params)
    return (model, metadata) if with_metadata else model
