"""Binary checkpoints: named float32 tensors + config text + rng state.

Layout (all integers little-endian unsigned 32-bit unless noted):

    magic     8 bytes  b"SNNMETA1"
    version   u32
    config    u32 byte length, then UTF-8 text
    state     u32 byte length, then UTF-8 JSON (rng state, counters)
    n_tensors u32
    tensor*   u32 name length, UTF-8 name,
              u32 ndim, ndim x u32 dims,
              row-major float32 little-endian data

The state JSON holds everything that is not a weight tensor but still
needed for bit-exact resume: the generator's bit-generator state, the
adaptive reward/punishment integer ratios, dopamine levels (as float
hex strings, so the JSON round trip cannot round), and the number of
completed epochs.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"SNNMETA1"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    version: int
    config_text: str
    state: dict
    tensors: dict     # name -> float32 ndarray


def _pack_block(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def save_checkpoint(path: str, tensors: dict, config_text: str, state: dict,
                    version: int = FORMAT_VERSION):
    names = list(tensors)
    if len(set(names)) != len(names):
        raise ValueError("tensor names must be unique")
    parts = [MAGIC, struct.pack("<I", version),
             _pack_block(config_text.encode("utf-8")),
             _pack_block(json.dumps(state, sort_keys=True).encode("utf-8")),
             struct.pack("<I", len(names))]
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)) + nb)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    blob = b"".join(parts)
    with open(path, "wb") as f:
        f.write(blob)


class _Reader:
    def __init__(self, buf: bytes, path: str):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise ValueError(f"checkpoint {self.path!r} is truncated")
        out = self.buf[self.off:self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        buf = f.read()
    r = _Reader(buf, path)
    if r.take(8) != MAGIC:
        raise ValueError(f"{path!r} is not a checkpoint (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    config_text = r.take(r.u32()).decode("utf-8")
    state = json.loads(r.take(r.u32()).decode("utf-8"))
    tensors = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        if name in tensors:
            raise ValueError(f"duplicate tensor {name!r} in {path!r}")
        ndim = r.u32()
        dims = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        data = np.frombuffer(r.take(4 * count), dtype="<f4")
        tensors[name] = data.reshape(dims).copy()
    if r.off != len(buf):
        raise ValueError(f"{path!r} has {len(buf) - r.off} trailing bytes")
    return Checkpoint(version, config_text, state, tensors)


def rng_state(rng: np.random.Generator) -> dict:
    """The bit-generator state, JSON-safe (python ints are arbitrary size)."""
    return rng.bit_generator.state


def restore_rng(state: dict) -> np.random.Generator:
    bitgen_cls = getattr(np.random, state["bit_generator"])
    bg = bitgen_cls()
    bg.state = state
    return np.random.Generator(bg)


def reward_state_dict(rs) -> dict:
    return {"ints": list(rs.state_ints()),
            "dopamine": float(rs.dopamine).hex()}


def restore_reward_state(rs, d: dict):
    rs.restore_ints(d["ints"])
    rs.dopamine = float.fromhex(d["dopamine"])
    return rs


def save_conv(path: str, conv_w: np.ndarray, cfg, rng: np.random.Generator):
    """Checkpoint holding only pretrained kernels (plus config and rng)."""
    from .runconfig import config_text
    save_checkpoint(path, {"conv.w": conv_w}, config_text(cfg),
                    {"kind": "conv", "rng": rng_state(rng)})


def load_conv(path: str):
    """-> (kernel weights, MetaConfig, rng restored past pretraining)."""
    from .runconfig import build_config, parse_config_text
    ck = load_checkpoint(path)
    if "conv.w" not in ck.tensors:
        raise ValueError(f"{path!r} has no conv.w tensor")
    cfg = build_config(parse_config_text(ck.config_text))
    return ck.tensors["conv.w"], cfg, restore_rng(ck.state["rng"])


def save_model(path: str, model, rng: np.random.Generator):
    """Full model checkpoint: all weights, reward counters, epoch, rng."""
    from .runconfig import config_text
    tensors = {"conv.w": model.conv.w,
               "mem.w": model.mem.syn.w,
               "dec.w": model.dec.syn.w}
    state = {"kind": "model",
             "rng": rng_state(rng),
             "rs": reward_state_dict(model.rs),
             "mem_rs": reward_state_dict(model.mem_rs),
             "epochs_completed": model.epochs_completed}
    save_checkpoint(path, tensors, config_text(model.cfg), state)


def load_model(path: str):
    """-> (Model, rng); the rng continues the saved stream bit-exactly."""
    from .meta import build_model
    from .runconfig import build_config, parse_config_text
    ck = load_checkpoint(path)
    missing = {"conv.w", "mem.w", "dec.w"} - set(ck.tensors)
    if missing:
        raise ValueError(f"{path!r} is missing tensors {sorted(missing)}")
    cfg = build_config(parse_config_text(ck.config_text))
    rng = restore_rng(ck.state["rng"])
    model = build_model(cfg, rng, conv_w=ck.tensors["conv.w"],
                        mem_w=ck.tensors["mem.w"], dec_w=ck.tensors["dec.w"])
    restore_reward_state(model.rs, ck.state["rs"])
    restore_reward_state(model.mem_rs, ck.state["mem_rs"])
    model.epochs_completed = int(ck.state["epochs_completed"])
    return model, rng
