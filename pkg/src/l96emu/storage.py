"""Binary trajectory files and model checkpoints.

All numbers are little-endian; floats are IEEE float64. Every file starts
with a 4-byte magic and a uint16 format version.

Trajectory (``L96X``)::

    magic 4s | version u16 | flags u16 (bit 0: standardized) | K u32 | J u32 |
    I u32 | dt f64 | n_steps u64 | X: n_steps*K f64, row-major

A JSON sidecar (``<file>.json``) carries model parameters, seed,
standardisation statistics and provenance.

ESN checkpoint (``L96E``)::

    magic | version | D u32 | K u32 | rho f64 | degree f64 | input_scale f64 |
    alpha f64 | transform u8 | seed u64 | nnz u64 |
    rows i64[nnz] | cols i64[nnz] | vals f64[nnz] | W_in f64[D*K] | W_out f64[K*D]

MLP checkpoint (``L96A``)::

    magic | version | n_widths u32 | widths u32[n] | hidden_act u8 | out_act u8 |
    seed u64 | cfg_len u32 | cfg JSON | per layer: W f64[in*out], b f64[out]

LSTM checkpoint (``L96L``)::

    magic | version | d_h u32 | q u32 | K u32 | seed u64 | cfg_len u32 | cfg JSON |
    W f64[4*d_h*(d_h+K)] | b f64[4*d_h] | W_oh f64[K*d_h]
"""
import json
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import ann, esn, lstm
from .dataset import SlowSeries
from .errors import FormatError

TRAJ_MAGIC = b"L96X"
ESN_MAGIC = b"L96E"
MLP_MAGIC = b"L96A"
LSTM_MAGIC = b"L96L"
VERSION = 1

_TRAJ_HEAD = struct.Struct("<4sHHIIIdQ")
_ESN_HEAD = struct.Struct("<4sHIIddddBQQ")
_ACT_IDS = {"linear": 0, "tanh": 1}
_F8 = np.dtype("<f8")
_I8 = np.dtype("<i8")


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# trajectories


def write_trajectory_header(fh, n_steps, K, J, I, dt, standardized):
    fh.write(_TRAJ_HEAD.pack(TRAJ_MAGIC, VERSION, int(bool(standardized)),
                             K, J, I, float(dt), int(n_steps)))


def read_trajectory_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(_TRAJ_HEAD.size)
    if len(raw) < _TRAJ_HEAD.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, flags, K, J, I, dt, n_steps = _TRAJ_HEAD.unpack(raw)
    if magic != TRAJ_MAGIC:
        raise FormatError(f"{path}: not a trajectory file (magic {magic!r})")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    return {"K": K, "J": J, "I": I, "dt": dt, "n_steps": n_steps,
            "standardized": bool(flags & 1), "offset": _TRAJ_HEAD.size}


def write_trajectory(path, series: SlowSeries, J=8, I=8, meta=None):
    """Write ``series`` and a sidecar holding ``meta`` plus its statistics."""
    path = Path(path)
    x = np.ascontiguousarray(series.samples, dtype=_F8)
    with open(path, "wb") as fh:
        write_trajectory_header(fh, x.shape[0], x.shape[1], J, I, series.dt,
                                series.standardized)
        x.tofile(fh)
    doc = dict(meta or {})
    if series.standardized:
        doc["mean"] = series.mean.tolist()
        doc["std"] = series.std.tolist()
    write_json(sidecar_path(path), doc)
    return path


def read_trajectory(path, mmap=False):
    """Load a trajectory file; returns ``(SlowSeries, header, sidecar)``."""
    head = read_trajectory_header(path)
    count = head["n_steps"] * head["K"]
    size = Path(path).stat().st_size
    if size != head["offset"] + count * 8:
        raise FormatError(f"{path}: size {size} does not match header "
                          f"({head['n_steps']} x {head['K']} samples)")
    if mmap:
        x = np.memmap(path, dtype=_F8, mode="r", offset=head["offset"],
                      shape=(head["n_steps"], head["K"]))
    else:
        x = np.fromfile(path, dtype=_F8, count=count,
                        offset=head["offset"]).reshape(head["n_steps"], head["K"])
    side = sidecar_path(path)
    meta = read_json(side) if side.exists() else {}
    mean = np.asarray(meta["mean"]) if "mean" in meta else None
    std = np.asarray(meta["std"]) if "std" in meta else None
    if head["standardized"] and (mean is None or std is None):
        raise FormatError(f"{path}: standardized file without mean/std in sidecar")
    series = SlowSeries(x, head["dt"], head["standardized"], mean, std)
    return series, head, meta


# ---------------------------------------------------------------------------
# checkpoints


def _write_arrays(fh, *arrays):
    for a in arrays:
        np.ascontiguousarray(a, dtype=_F8).tofile(fh)


class _Reader:
    def __init__(self, raw, path):
        self.raw = raw
        self.pos = 0
        self.path = path

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        if self.pos + s.size > len(self.raw):
            raise FormatError(f"{self.path}: truncated checkpoint")
        out = s.unpack_from(self.raw, self.pos)
        self.pos += s.size
        return out

    def array(self, shape, dtype=_F8):
        n = int(np.prod(shape))
        nbytes = n * dtype.itemsize
        if self.pos + nbytes > len(self.raw):
            raise FormatError(f"{self.path}: truncated checkpoint")
        a = np.frombuffer(self.raw, dtype=dtype, count=n, offset=self.pos)
        self.pos += nbytes
        return a.reshape(shape).astype(dtype.newbyteorder("="), copy=True)

    def json(self):
        (n,) = self.unpack("<I")
        if self.pos + n > len(self.raw):
            raise FormatError(f"{self.path}: truncated checkpoint")
        doc = json.loads(self.raw[self.pos:self.pos + n].decode())
        self.pos += n
        return doc

    def done(self):
        if self.pos != len(self.raw):
            raise FormatError(f"{self.path}: {len(self.raw) - self.pos} trailing bytes")


def _json_bytes(doc):
    raw = json.dumps(doc, sort_keys=True).encode()
    return struct.pack("<I", len(raw)) + raw


def save_esn(path, model: esn.EsnModel):
    c = model.config
    A = model.A.tocoo()
    with open(path, "wb") as fh:
        fh.write(_ESN_HEAD.pack(ESN_MAGIC, VERSION, c.D, model.K, c.rho, c.degree,
                                c.input_scale, c.alpha, esn.TRANSFORMS[c.transform],
                                c.seed, A.nnz))
        A.row.astype(_I8).tofile(fh)
        A.col.astype(_I8).tofile(fh)
        _write_arrays(fh, A.data, model.W_in, model.W_out)


def save_mlp(path, model: ann.MlpModel, cfg=None):
    w = model.widths
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHI", MLP_MAGIC, VERSION, len(w)))
        fh.write(struct.pack(f"<{len(w)}I", *w))
        fh.write(struct.pack("<BBQ", _ACT_IDS["tanh"], _ACT_IDS["linear"], model.seed))
        fh.write(_json_bytes(cfg or {}))
        for l in range(model.n_layers):
            _write_arrays(fh, model.params[f"W{l}"], model.params[f"b{l}"])


def save_lstm(path, model: lstm.LstmModel, cfg=None):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHIIIQ", LSTM_MAGIC, VERSION, model.d_h, model.q,
                             model.K, model.seed))
        fh.write(_json_bytes(cfg or {}))
        _write_arrays(fh, model.params["W"], model.params["b"], model.params["W_oh"])


def save_checkpoint(path, model, cfg=None):
    if isinstance(model, esn.EsnModel):
        save_esn(path, model)
    elif isinstance(model, ann.MlpModel):
        save_mlp(path, model, cfg)
    elif isinstance(model, lstm.LstmModel):
        save_lstm(path, model, cfg)
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    return Path(path)


def _load_esn(r):
    (_, _, D, K, rho, degree, input_scale, alpha, tid, seed, nnz) = r.unpack(
        _ESN_HEAD.format)
    names = {v: k for k, v in esn.TRANSFORMS.items()}
    if tid not in names:
        raise FormatError(f"{r.path}: unknown transform id {tid}")
    cfg = esn.EsnConfig(D=D, rho=rho, degree=degree, input_scale=input_scale,
                        alpha=alpha, transform=names[tid], seed=seed)
    rows = r.array((nnz,), _I8)
    cols = r.array((nnz,), _I8)
    vals = r.array((nnz,))
    W_in = r.array((D, K))
    W_out = r.array((K, D))
    r.done()
    A = sp.csr_matrix((vals, (rows, cols)), shape=(D, D))
    A.sort_indices()
    for a in (A.data, A.indices, A.indptr, W_in):
        a.flags.writeable = False
    return esn.EsnModel(cfg, A, W_in, W_out, np.zeros(D)), cfg.to_dict()


def _load_mlp(r):
    (n,) = r.unpack("<I")
    widths = r.unpack(f"<{n}I")
    hid, out, seed = r.unpack("<BBQ")
    if (hid, out) != (_ACT_IDS["tanh"], _ACT_IDS["linear"]):
        raise FormatError(f"{r.path}: unsupported activations {hid}, {out}")
    cfg = r.json()
    params = {}
    for l, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        params[f"W{l}"] = r.array((a, b))
        params[f"b{l}"] = r.array((b,))
    r.done()
    return ann.MlpModel(tuple(widths), params, seed), cfg


def _load_lstm(r):
    d_h, q, K, seed = r.unpack("<IIIQ")
    cfg = r.json()
    params = {"W": r.array((4 * d_h, d_h + K)), "b": r.array((4 * d_h,)),
              "W_oh": r.array((K, d_h))}
    r.done()
    return lstm.LstmModel(d_h, q, K, params, seed), cfg


def load_checkpoint(path):
    """Load any checkpoint; returns ``(model, cfg_dict)``."""
    raw = Path(path).read_bytes()
    r = _Reader(raw, path)
    magic, version = r.unpack("<4sH")
    loaders = {ESN_MAGIC: _load_esn, MLP_MAGIC: _load_mlp, LSTM_MAGIC: _load_lstm}
    if magic not in loaders:
        raise FormatError(f"{path}: unknown checkpoint magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    r.pos = 0
    if magic != ESN_MAGIC:
        r.unpack("<4sH")
    return loaders[magic](r)
