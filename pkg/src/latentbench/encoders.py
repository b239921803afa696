"""Constructed (not learned) encoders applied directly to the factor matrix,
plus the null baselines. Each returns the code matrix together with
ground-truth alignment metadata and the identifiability equivalence class the
construction belongs to.

Specs record the concrete drawn parameters (scales, permutations, mixing
matrices), so re-applying a spec to the same factors reproduces the codes
bit-identically; `apply_spec` is that replay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numstats import Rng, as_factor_matrix, random_orthogonal

__all__ = [
    "EncoderSpec", "EncodedDataset", "mixing_matrix", "apply_spec",
    "encode_e1", "encode_e2", "encode_e3", "encode_e4", "encode_e5",
    "encode_e6", "encode_e7", "encode_e8", "encode_null", "reconstruct_e8",
]

MONOTONE_FNS = {
    "tanh": np.tanh,
    "cube": lambda x: x ** 3,
    "cbrt": np.cbrt,
    "sinh": np.sinh,
}

_MONOTONE_CYCLE = ("tanh", "cube", "cbrt", "sinh")
_CROSS_CYCLE = ("product", "sumsq", "sine-linear")


@dataclass
class EncoderSpec:
    kind: str  # E1..E8, E9-uniform, E10-gaussian, symmetric-mixing
    m: int
    params: dict = field(default_factory=dict)


@dataclass
class EncodedDataset:
    z: np.ndarray  # (n, d) factors
    zhat: np.ndarray  # (n, m) codes
    spec: EncoderSpec
    alignment: list  # per code: tuple of source factor indices
    equivalence: str  # perm | nl | aff | none

    def __post_init__(self):
        if self.z.ndim != 2 or self.zhat.ndim != 2:
            raise ValueError("factors and codes must be 2-d matrices")
        if self.z.shape[0] != self.zhat.shape[0]:
            raise ValueError("factors and codes must have the same rows")
        if len(self.alignment) != self.zhat.shape[1]:
            raise ValueError("alignment needs one entry per code")
        if self.equivalence not in ("perm", "nl", "aff", "none"):
            raise ValueError(f"unknown equivalence {self.equivalence!r}")

    @property
    def n(self):
        return self.z.shape[0]

    @property
    def d(self):
        return self.z.shape[1]

    @property
    def m(self):
        return self.zhat.shape[1]


def _draw_scales(g: np.random.Generator, count: int) -> np.ndarray:
    """Nonzero coefficients: |value| log-uniform in [0.3, 3], random sign.

    Bounded away from zero so encoder conditioning stays independent of any
    mixing condition number under study."""
    mag = np.exp(g.uniform(math.log(0.3), math.log(3.0), size=count))
    sign = np.where(g.random(count) < 0.5, -1.0, 1.0)
    return mag * sign


def encode_e1(z, pi=None, s=None, rng: Rng | None = None) -> EncodedDataset:
    """Permutation + nonzero rescaling: zhat_j = s_j * z[pi(j)]."""
    z = as_factor_matrix(z)
    d = z.shape[1]
    if pi is None:
        pi = np.arange(d)
    pi = np.asarray(pi, dtype=int)
    if sorted(pi.tolist()) != list(range(d)):
        raise ValueError("pi must be a permutation of range(d)")
    if s is None:
        if rng is None:
            raise ValueError("either s or rng must be given")
        s = _draw_scales(rng.derive("e1-scales").generator(), d)
    s = np.asarray(s, dtype=float)
    if np.any(s == 0.0):
        raise ValueError("scales must be nonzero")
    spec = EncoderSpec("E1", d, {"pi": pi.tolist(), "s": s.tolist()})
    zhat = z[:, pi] * s
    return EncodedDataset(z, zhat, spec, [(int(p),) for p in pi], "perm")


def encode_e2(z, pi=None, s=None, alpha: float = 0.5, h_ids=None,
              rng: Rng | None = None) -> EncodedDataset:
    """Blend of a scaled copy and a strictly monotone nonlinearity:
    zhat_j = (1-alpha) * s_j * z[pi(j)] + alpha * h_j(z[pi(j)]).

    alpha=0 reduces exactly to encode_e1; monotone blends of monotone
    functions with positive weights keep rank correlations at 1.
    """
    z = as_factor_matrix(z)
    d = z.shape[1]
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if pi is None:
        pi = np.arange(d)
    pi = np.asarray(pi, dtype=int)
    if s is None:
        if rng is None:
            raise ValueError("either s or rng must be given")
        s = _draw_scales(rng.derive("e2-scales").generator(), d)
    s = np.asarray(s, dtype=float)
    if np.any(s == 0.0):
        raise ValueError("scales must be nonzero")
    if h_ids is None:
        h_ids = [_MONOTONE_CYCLE[j % len(_MONOTONE_CYCLE)] for j in range(d)]
    for h in h_ids:
        if h not in MONOTONE_FNS:
            raise ValueError(f"nonlinearity {h!r} not in {sorted(MONOTONE_FNS)}")
    spec = EncoderSpec("E2", d, {"pi": pi.tolist(), "s": s.tolist(),
                                 "alpha": alpha, "h_ids": list(h_ids)})
    src = z[:, pi]
    zhat = np.empty_like(src)
    for j in range(d):
        zhat[:, j] = (1.0 - alpha) * s[j] * src[:, j] + alpha * MONOTONE_FNS[h_ids[j]](src[:, j])
    return EncodedDataset(z, zhat, spec, [(int(p),) for p in pi], "nl")


def mixing_matrix(d_in: int, d_out: int, kappa: float, rng: Rng) -> np.ndarray:
    """Mixing matrix with singular values linearly spaced from 1 to 1/kappa:
    A = U diag(linspace(1, 1/kappa, d_in)) V^T with Haar orthogonal factors.
    Condition number is kappa by construction; rank is d_in."""
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    if d_out < d_in:
        raise ValueError("d_out must be >= d_in")
    u = random_orthogonal(d_out, rng.derive("mixing-u"))[:, :d_in]
    v = random_orthogonal(d_in, rng.derive("mixing-v"))
    sv = np.linspace(1.0, 1.0 / kappa, d_in)
    return (u * sv) @ v.T


def _affine_encode(z, m, kappa, rng, kind, signed_permutation_at_unit_kappa, offset):
    z = as_factor_matrix(z)
    d = z.shape[1]
    if signed_permutation_at_unit_kappa and kappa == 1.0 and m == d:
        g = rng.derive("affine-signed-perm").generator()
        perm = g.permutation(d)
        signs = np.where(g.random(d) < 0.5, -1.0, 1.0)
        a = np.zeros((d, d))
        a[np.arange(d), perm] = signs
    else:
        a = mixing_matrix(d, m, kappa, rng)
    b = np.zeros(m) if offset is None else np.asarray(offset, dtype=float)
    spec = EncoderSpec(kind, m, {"A": a.tolist(), "b": b.tolist(), "kappa": kappa})
    zhat = z @ a.T + b
    alignment = [tuple(range(d))] * m
    return EncodedDataset(z, zhat, spec, alignment, "aff")


def encode_e3(z, kappa: float, rng: Rng, offset=None,
              signed_permutation_at_unit_kappa: bool = False) -> EncodedDataset:
    """Full-rank affine mixing at matched dimension (m = d)."""
    z = as_factor_matrix(z)
    return _affine_encode(z, z.shape[1], kappa, rng, "E3",
                          signed_permutation_at_unit_kappa, offset)


def encode_e7(z, m: int, kappa: float, rng: Rng, offset=None) -> EncodedDataset:
    """Overcomplete affine mixing (m > d), rank d."""
    z = as_factor_matrix(z)
    if m <= z.shape[1]:
        raise ValueError("E7 needs m > d")
    return _affine_encode(z, m, kappa, rng, "E7", False, offset)


def encode_e4(z, retained, s=None, rng: Rng | None = None) -> EncodedDataset:
    """Factor dropping: scaled copies of a strict subset of factors,
    in the given order."""
    z = as_factor_matrix(z)
    d = z.shape[1]
    retained = [int(j) for j in retained]
    if not retained or len(retained) >= d:
        raise ValueError("E4 needs 1 <= |retained| < d")
    if len(set(retained)) != len(retained) or not all(0 <= j < d for j in retained):
        raise ValueError("retained indices must be distinct and in range")
    m = len(retained)
    if s is None:
        if rng is None:
            raise ValueError("either s or rng must be given")
        s = _draw_scales(rng.derive("e4-scales").generator(), m)
    s = np.asarray(s, dtype=float)
    if np.any(s == 0.0):
        raise ValueError("scales must be nonzero")
    spec = EncoderSpec("E4", m, {"retained": retained, "s": s.tolist()})
    zhat = z[:, retained] * s
    return EncodedDataset(z, zhat, spec, [(j,) for j in retained], "perm")


def encode_e5(z, m: int, sigma=None, a=None, rng: Rng | None = None) -> EncodedDataset:
    """Overcomplete duplication: zhat_j = a_j * z[sigma(j)] with sigma
    surjective, so every factor is represented at least once."""
    z = as_factor_matrix(z)
    d = z.shape[1]
    if m <= d:
        raise ValueError("E5 needs m > d")
    if sigma is None:
        sigma = [j % d for j in range(m)]
    sigma = [int(t) for t in sigma]
    if set(sigma) != set(range(d)):
        raise ValueError("sigma must be surjective onto range(d)")
    if a is None:
        if rng is None:
            raise ValueError("either a or rng must be given")
        a = _draw_scales(rng.derive("e5-scales").generator(), m)
    a = np.asarray(a, dtype=float)
    if np.any(a == 0.0):
        raise ValueError("scales must be nonzero")
    spec = EncoderSpec("E5", m, {"sigma": sigma, "a": a.tolist()})
    zhat = z[:, sigma] * a
    return EncodedDataset(z, zhat, spec, [(t,) for t in sigma], "perm")


def encode_e6(z, m: int, pi=None, g_ids=None, phi_ids=None,
              rng: Rng | None = None) -> EncodedDataset:
    """Overcomplete redundant codes: the first d codes are monotone
    transforms of single factors; the remaining m - d carry cross-factor
    information (pairwise products, sums of squares, sines of random linear
    forms)."""
    z = as_factor_matrix(z)
    d = z.shape[1]
    if m <= d:
        raise ValueError("E6 needs m > d")
    if rng is None:
        raise ValueError("E6 needs an rng (for the random linear forms)")
    if pi is None:
        pi = np.arange(d)
    pi = np.asarray(pi, dtype=int)
    if g_ids is None:
        g_ids = [_MONOTONE_CYCLE[j % len(_MONOTONE_CYCLE)] for j in range(d)]
    if phi_ids is None:
        phi_ids = [_CROSS_CYCLE[t % len(_CROSS_CYCLE)] for t in range(m - d)]
    zhat = np.empty((z.shape[0], m))
    alignment = []
    for j in range(d):
        zhat[:, j] = MONOTONE_FNS[g_ids[j]](z[:, pi[j]])
        alignment.append((int(pi[j]),))
    g = rng.derive("e6-forms").generator()
    waves = []
    for t, phi in enumerate(phi_ids):
        i, j = t % d, (t + 1) % d
        if phi == "product":
            zhat[:, d + t] = z[:, i] * z[:, j]
            alignment.append((i, j))
            waves.append(None)
        elif phi == "sumsq":
            zhat[:, d + t] = z[:, i] ** 2 + z[:, j] ** 2
            alignment.append((i, j))
            waves.append(None)
        elif phi == "sine-linear":
            w = g.standard_normal(d)
            zhat[:, d + t] = np.sin(z @ w)
            alignment.append(tuple(range(d)))
            waves.append(w.tolist())
        else:
            raise ValueError(f"unknown cross-factor code {phi!r}")
    spec = EncoderSpec("E6", m, {"pi": pi.tolist(), "g_ids": list(g_ids),
                                 "phi_ids": list(phi_ids), "waves": waves})
    return EncodedDataset(z, zhat, spec, alignment, "nl")


def _e8_affine_params(z):
    # affine map of each factor's empirical range into (-pi + 0.01, pi - 0.01),
    # keeping atan2 injective on the sample
    lo = z.min(axis=0)
    hi = z.max(axis=0)
    width = np.where(hi > lo, hi - lo, 1.0)
    scale = (2.0 * np.pi - 0.02) / width
    return lo, scale


def encode_e8(z, k: int, pi=None) -> EncodedDataset:
    """Code-splitting: each factor becomes k codes.

    k=2 uses a (sin, cos) pair of the range-mapped factor, invertible via
    atan2. k>2 uses equal-quantile value-carrying interval codes: code t of
    factor i equals the factor value when it falls in quantile interval t and
    0 otherwise, so the sum of a factor's codes reconstructs it exactly.
    """
    z = as_factor_matrix(z)
    d = z.shape[1]
    if k < 2:
        raise ValueError("E8 needs k >= 2")
    if pi is None:
        pi = np.arange(d)
    pi = np.asarray(pi, dtype=int)
    src = z[:, pi]
    m = k * d
    zhat = np.empty((z.shape[0], m))
    alignment = []
    if k == 2:
        lo, scale = _e8_affine_params(src)
        u = (src - lo) * scale - (np.pi - 0.01)
        for i in range(d):
            zhat[:, 2 * i] = np.sin(u[:, i])
            zhat[:, 2 * i + 1] = np.cos(u[:, i])
            alignment.extend([(int(pi[i]),), (int(pi[i]),)])
        params = {"k": 2, "pi": pi.tolist(), "lo": lo.tolist(),
                  "scale": scale.tolist(), "reconstruction": "atan2"}
    else:
        edges_all = []
        for i in range(d):
            edges = np.quantile(src[:, i], np.linspace(0.0, 1.0, k + 1))
            idx = np.clip(np.searchsorted(edges, src[:, i], side="right") - 1, 0, k - 1)
            for t in range(k):
                zhat[:, k * i + t] = np.where(idx == t, src[:, i], 0.0)
                alignment.append((int(pi[i]),))
            edges_all.append(edges.tolist())
        params = {"k": k, "pi": pi.tolist(), "edges": edges_all,
                  "reconstruction": "sum"}
    spec = EncoderSpec("E8", m, params)
    return EncodedDataset(z, zhat, spec, alignment, "nl")


def reconstruct_e8(ds: EncodedDataset) -> np.ndarray:
    """Apply the reconstruction function declared by encode_e8; returns the
    recovered source factors in pi-order."""
    p = ds.spec.params
    k = p["k"]
    d = ds.d
    if p["reconstruction"] == "atan2":
        lo = np.asarray(p["lo"])
        scale = np.asarray(p["scale"])
        out = np.empty((ds.n, d))
        for i in range(d):
            u = np.arctan2(ds.zhat[:, 2 * i], ds.zhat[:, 2 * i + 1])
            out[:, i] = (u + (np.pi - 0.01)) / scale[i] + lo[i]
        return out
    return np.stack([ds.zhat[:, k * i:k * (i + 1)].sum(axis=1) for i in range(d)], axis=1)


def encode_null(z, m: int, kind: str, rng: Rng) -> EncodedDataset:
    """Null baseline: codes drawn independently of the factors."""
    z = as_factor_matrix(z)
    if m < 1:
        raise ValueError("need m >= 1")
    g = rng.derive("null-codes").generator()
    if kind == "uniform":
        zhat = g.uniform(0.0, 1.0, size=(z.shape[0], m))
        name = "E9-uniform"
    elif kind == "gaussian":
        zhat = g.standard_normal((z.shape[0], m))
        name = "E10-gaussian"
    else:
        raise ValueError(f"unknown null kind {kind!r}")
    spec = EncoderSpec(name, m, {"kind": kind})
    return EncodedDataset(z, zhat, spec, [() for _ in range(m)], "none")


def apply_spec(z, spec: EncoderSpec) -> np.ndarray:
    """Replay a recorded encoder spec on factors z. Bit-identical to the
    original encoding for the same z (the self-consistency audit)."""
    z = as_factor_matrix(z)
    p = spec.params
    kind = spec.kind
    if kind == "E1":
        return z[:, p["pi"]] * np.asarray(p["s"])
    if kind == "E2":
        src = z[:, p["pi"]]
        s = np.asarray(p["s"])
        alpha = p["alpha"]
        out = np.empty_like(src)
        for j in range(src.shape[1]):
            out[:, j] = (1.0 - alpha) * s[j] * src[:, j] \
                + alpha * MONOTONE_FNS[p["h_ids"][j]](src[:, j])
        return out
    if kind in ("E3", "E7"):
        return z @ np.asarray(p["A"]).T + np.asarray(p["b"])
    if kind == "E4":
        return z[:, p["retained"]] * np.asarray(p["s"])
    if kind == "E5":
        return z[:, p["sigma"]] * np.asarray(p["a"])
    if kind == "E6":
        d = z.shape[1]
        src = z[:, p["pi"]]
        m = spec.m
        out = np.empty((z.shape[0], m))
        for j in range(d):
            out[:, j] = MONOTONE_FNS[p["g_ids"][j]](src[:, j])
        for t, phi in enumerate(p["phi_ids"]):
            i, j = t % d, (t + 1) % d
            if phi == "product":
                out[:, d + t] = z[:, i] * z[:, j]
            elif phi == "sumsq":
                out[:, d + t] = z[:, i] ** 2 + z[:, j] ** 2
            else:
                out[:, d + t] = np.sin(z @ np.asarray(p["waves"][t]))
        return out
    if kind == "E8":
        k = p["k"]
        src = z[:, p["pi"]]
        d = z.shape[1]
        out = np.empty((z.shape[0], k * d))
        if k == 2:
            lo = np.asarray(p["lo"])
            scale = np.asarray(p["scale"])
            u = (src - lo) * scale - (np.pi - 0.01)
            for i in range(d):
                out[:, 2 * i] = np.sin(u[:, i])
                out[:, 2 * i + 1] = np.cos(u[:, i])
        else:
            for i in range(d):
                edges = np.asarray(p["edges"][i])
                idx = np.clip(np.searchsorted(edges, src[:, i], side="right") - 1, 0, k - 1)
                for t in range(k):
                    out[:, k * i + t] = np.where(idx == t, src[:, i], 0.0)
        return out
    raise ValueError(f"spec kind {kind!r} has no replay rule")
