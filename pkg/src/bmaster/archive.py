"""Posterior draw container and its binary / CSV serializations.

Binary layout (little-endian)::

    magic        4 bytes   b"BMST"
    version      u32
    N, P, Q, T   u64 each
    seed         u64
    config hash  32 bytes  (sha256)
    payload      T draw records, each
                     B        P*Q float64, column-major (beta_1q..beta_Pq for q = 1..Q)
                     sigma2   Q float64
                     lambda1_sq, lambda2_sq  float64
"""

import struct
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from bmaster.errors import InvalidInputError

MAGIC = b"BMST"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sI5Q32s")


@dataclass
class PosteriorArchive:
    """Retained draws of B, sigma2 and the two shrinkage levels."""

    B: np.ndarray            # (T, P, Q)
    sigma2: np.ndarray       # (T, Q)
    lambda1_sq: np.ndarray   # (T,)
    lambda2_sq: np.ndarray   # (T,)
    N: int
    seed: int
    config_hash: bytes = b"\0" * 32
    counters: dict = field(default_factory=dict)
    elapsed: float = float("nan")

    def __post_init__(self):
        T = self.B.shape[0]
        if self.sigma2.shape != (T, self.B.shape[2]) or self.lambda1_sq.shape != (T,) \
                or self.lambda2_sq.shape != (T,):
            raise InvalidInputError("archive blocks disagree on draw count or dimensions")
        if len(self.config_hash) != 32:
            raise InvalidInputError("config hash must be 32 bytes")

    @property
    def T(self):
        return self.B.shape[0]

    @property
    def P(self):
        return self.B.shape[1]

    @property
    def Q(self):
        return self.B.shape[2]

    def posterior_median(self):
        return np.median(self.B, axis=0)

    def _records(self):
        dt = np.dtype([("B", "<f8", (self.Q, self.P)), ("sigma2", "<f8", (self.Q,)),
                       ("l1", "<f8"), ("l2", "<f8")])
        rec = np.empty(self.T, dtype=dt)
        rec["B"] = np.transpose(self.B, (0, 2, 1))
        rec["sigma2"] = self.sigma2
        rec["l1"] = self.lambda1_sq
        rec["l2"] = self.lambda2_sq
        return rec

    def to_bytes(self):
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, self.N, self.P, self.Q, self.T,
                              int(self.seed), bytes(self.config_hash))
        return header + self._records().tobytes()

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, buf):
        if len(buf) < _HEADER.size:
            raise InvalidInputError("archive is truncated (no header)")
        magic, version, N, P, Q, T, seed, chash = _HEADER.unpack_from(buf)
        if magic != MAGIC:
            raise InvalidInputError(f"bad archive magic {magic!r}")
        if version != FORMAT_VERSION:
            raise InvalidInputError(f"unsupported archive version {version}")
        dt = np.dtype([("B", "<f8", (Q, P)), ("sigma2", "<f8", (Q,)),
                       ("l1", "<f8"), ("l2", "<f8")])
        payload = buf[_HEADER.size:]
        if len(payload) != T * dt.itemsize:
            raise InvalidInputError(
                f"archive payload has {len(payload)} bytes, header implies {T * dt.itemsize}")
        rec = np.frombuffer(payload, dtype=dt, count=T)
        return cls(B=np.ascontiguousarray(np.transpose(rec["B"], (0, 2, 1))),
                   sigma2=rec["sigma2"].copy(), lambda1_sq=rec["l1"].copy(),
                   lambda2_sq=rec["l2"].copy(), N=N, seed=seed, config_hash=chash)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_frame(self):
        """One row per draw; coefficients flattened column-major as ``beta_p_q``."""
        P, Q = self.P, self.Q
        names = [f"beta_{p + 1}_{q + 1}" for q in range(Q) for p in range(P)]
        flat = np.transpose(self.B, (0, 2, 1)).reshape(self.T, P * Q)
        df = pd.DataFrame(flat, columns=names)
        for q in range(Q):
            df[f"sigma2_{q + 1}"] = self.sigma2[:, q]
        df["lambda1_sq"] = self.lambda1_sq
        df["lambda2_sq"] = self.lambda2_sq
        return df

    def export_csv(self, path):
        self.to_frame().to_csv(path, index_label="draw")
