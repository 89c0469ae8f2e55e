"""Binary checkpoint container (little-endian).

Layout, in order::

    magic        8 bytes   b"GCRCKPT\\0"
    version      u16       FORMAT_VERSION
    head_tag     u8        0 = linear, 1 = cosine, 2 = gcr
    flags        u8        bit 0: feature normalization on
    n, C         u32, u32
    dims         C x u32   class subspace dimensions (all 1 for vector heads)
    param        n x sum(dims) f64, row-major   (S for gcr, W otherwise)
    momentum     n x sum(dims) f64, row-major
    tau, mu      f64, f64
    reorth       u32
    iter         u64
    head_scale   f64       gamma (gcr) or scale (cosine); 0 for linear
    bias         C x f64   linear head only
    layers       u32       backbone layer count (0 = no backbone)
      per layer: rows u32, cols u32, weight rows x cols f64 row-major, bias cols f64
    meta_len     u32
    meta         meta_len bytes of UTF-8 JSON
    crc32        u32       over every preceding byte
"""
import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptContainer, VersionMismatch
from .grassmann import ProductGrassmannParam
from .heads import HEAD_TAGS, CosineHead, GcrHead, LinearHead
from .train import MlpBackbone, Model

MAGIC = b"GCRCKPT\x00"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model: Model
    momentum: np.ndarray
    tau: float = 0.0
    mu: float = 0.0
    reorth_period: int = 0
    iter: int = 0
    metadata: dict = field(default_factory=dict)


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def dumps(ckpt):
    model = ckpt.model
    head = model.head
    tag = HEAD_TAGS[head.kind]
    if isinstance(head, GcrHead):
        param, dims, scale = head.param.matrix, head.param.dims, head.gamma
    else:
        param, dims = head.weight, (1,) * head.num_classes
        scale = head.scale if isinstance(head, CosineHead) else 0.0
    n = param.shape[0]
    momentum = np.zeros_like(param) if ckpt.momentum is None else ckpt.momentum
    if momentum.shape != param.shape:
        raise CorruptContainer("momentum buffer shape differs from the head parameter")
    flags = int(bool(getattr(head, "normalize", False)))
    out = [MAGIC, struct.pack("<HBBII", FORMAT_VERSION, tag, flags, n, len(dims)),
           struct.pack(f"<{len(dims)}I", *dims), _f64(param), _f64(momentum),
           struct.pack("<ddIQd", ckpt.tau, ckpt.mu, ckpt.reorth_period, ckpt.iter, scale)]
    if isinstance(head, LinearHead):
        out.append(_f64(head.bias))
    net = model.backbone
    layers = [] if net is None else list(zip(net.weights, net.biases))
    out.append(struct.pack("<I", len(layers)))
    for w, b in layers:
        out += [struct.pack("<II", *w.shape), _f64(w), _f64(b)]
    meta = json.dumps(ckpt.metadata, sort_keys=True).encode("utf-8")
    out += [struct.pack("<I", len(meta)), meta]
    body = b"".join(out)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, size):
        if self.pos + size > len(self.buf):
            raise CorruptContainer("checkpoint is truncated")
        chunk = self.buf[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def matrix(self, rows, cols):
        return np.frombuffer(self.take(8 * rows * cols), dtype="<f8").astype(np.float64).reshape(rows, cols)


def loads(buf):
    if len(buf) < len(MAGIC) + 2 or buf[:len(MAGIC)] != MAGIC:
        raise CorruptContainer("not a checkpoint container (bad magic)")
    r = _Reader(buf)
    r.take(len(MAGIC))
    (version,) = r.unpack("<H")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"container version {version}, expected {FORMAT_VERSION}")
    if len(buf) < 4 or zlib.crc32(buf[:-4]) != struct.unpack("<I", buf[-4:])[0]:
        raise CorruptContainer("checksum mismatch (truncated or corrupted checkpoint)")
    tag, flags, n, c = r.unpack("<BBII")
    dims = r.unpack(f"<{c}I")
    width = sum(dims)
    param = r.matrix(n, width)
    momentum = r.matrix(n, width)
    tau, mu, reorth, it, scale = r.unpack("<ddIQd")
    if tag == HEAD_TAGS["gcr"]:
        head = GcrHead(ProductGrassmannParam(param, dims), scale, bool(flags & 1))
    elif tag == HEAD_TAGS["cosine"]:
        head = CosineHead(param, scale)
    elif tag == HEAD_TAGS["linear"]:
        head = LinearHead(param, r.matrix(1, c)[0])
    else:
        raise CorruptContainer(f"unknown head tag {tag}")
    (nlayers,) = r.unpack("<I")
    weights, biases = [], []
    for _ in range(nlayers):
        rows, cols = r.unpack("<II")
        weights.append(r.matrix(rows, cols))
        biases.append(r.matrix(1, cols)[0])
    net = MlpBackbone(weights, biases) if nlayers else None
    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8"))
    except ValueError as exc:
        raise CorruptContainer(f"bad metadata: {exc}") from exc
    if r.pos != len(buf) - 4:
        raise CorruptContainer("trailing bytes after metadata")
    return Checkpoint(Model(net, head), momentum, tau, mu, reorth, it, meta)


def save(path, ckpt):
    data = dumps(ckpt)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def from_training(result, config, metadata=None):
    """Build a :class:`Checkpoint` from a :class:`gcr.train.TrainResult`."""
    meta = {"config": config.to_dict()}
    meta.update(metadata or {})
    state = result.rsgd
    if state is not None:
        return Checkpoint(result.model, state.buffer, state.lr, state.momentum,
                          state.reorth_period, state.iter, meta)
    return Checkpoint(result.model, result.head_buffer, config.tau, config.tau_momentum,
                      config.reorth_period, result.steps, meta)
