"""Samplers for the four latent-factor classes: independent factors,
equicorrelated factors, an invertible functional constraint, and a
synergistic (jointly deterministic) constraint.

Every sample carries its constraint metadata so downstream checks can reason
about effective dimensionality without re-deriving the generating process.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numstats import Rng

__all__ = ["DgpSpec", "DgpSample", "LINKS", "SYNERGIES",
           "sample_d1", "sample_d2", "sample_d3", "sample_d4", "sample"]


def _tanh_affine(x):
    # strictly monotone with a bounded nonlinear part: slope in [1, 2]
    return x + np.tanh(x)


LINKS = {
    "cube": lambda x: x ** 3,
    "tanh-affine": _tanh_affine,
    "exp": np.exp,
}

SYNERGIES = {
    "product": lambda a, b: a * b,
    "radius": np.hypot,
}


@dataclass(frozen=True)
class DgpSpec:
    kind: str  # D1 | D2 | D3 | D4
    d: int
    marginal: str = "normal"  # normal | uniform
    rho: float = 0.0  # D2
    parent: int = 0  # D3
    child: int = 1  # D3 (D4 child is fixed by sources)
    link: str = "cube"  # D3
    sources: tuple = (0, 1)  # D4
    synergy_child: int = 2  # D4
    synergy: str = "product"  # D4

    def __post_init__(self):
        if self.kind not in ("D1", "D2", "D3", "D4"):
            raise ValueError(f"unknown dgp kind {self.kind!r}")
        if self.marginal not in ("normal", "uniform"):
            raise ValueError(f"unknown marginal {self.marginal!r}")
        d = self.d
        if self.kind == "D1" and d < 1:
            raise ValueError("D1 needs d >= 1")
        if self.kind == "D2":
            if d < 2:
                raise ValueError("D2 needs d >= 2")
            lo = -1.0 / (d - 1)
            if not lo + 1e-9 < self.rho < 1.0 - 1e-9:
                raise ValueError(
                    f"equicorrelation rho={self.rho} infeasible for d={d}: "
                    f"the covariance is positive semidefinite only for rho > {lo:.6g}"
                )
        if self.kind == "D3":
            if d < 2:
                raise ValueError("D3 needs d >= 2")
            if self.link not in LINKS:
                raise ValueError(
                    f"link {self.link!r} is not in the invertible library {sorted(LINKS)}"
                )
            if self.parent == self.child or not (0 <= self.parent < d and 0 <= self.child < d):
                raise ValueError("D3 parent/child must be distinct in-range indices")
        if self.kind == "D4":
            if d < 3:
                raise ValueError("D4 needs d >= 3")
            if self.synergy not in SYNERGIES:
                raise ValueError(f"synergy {self.synergy!r} not in {sorted(SYNERGIES)}")
            i, j = self.sources
            k = self.synergy_child
            if len({i, j, k}) != 3 or not all(0 <= t < d for t in (i, j, k)):
                raise ValueError("D4 sources/child must be three distinct in-range indices")


@dataclass
class DgpSample:
    z: np.ndarray  # (n, d)
    d_eff: int
    constraints: list  # [(child, (parents...), function id), ...]
    spec: DgpSpec

    def __post_init__(self):
        assert self.d_eff == self.spec.d - len(self.constraints)

    def free_factors(self) -> list:
        children = {c for c, _, _ in self.constraints}
        return [j for j in range(self.spec.d) if j not in children]

    def retention_order(self) -> list:
        """Canonical factor order for dropping: free factors first (ascending),
        constrained children last. Retaining the first d_eff entries keeps
        exactly one lossless basis."""
        children = [c for c, _, _ in self.constraints]
        return self.free_factors() + children

    def replay_constraints(self) -> np.ndarray:
        """Recompute constrained columns from their parents; residual must be
        < 1e-12 on every row."""
        out = self.z.copy()
        for child, parents, fn in self.constraints:
            if fn in LINKS:
                out[:, child] = LINKS[fn](self.z[:, parents[0]])
            else:
                out[:, child] = SYNERGIES[fn](self.z[:, parents[0]], self.z[:, parents[1]])
        return out


def _marginal_draw(g: np.random.Generator, n: int, d: int, marginal: str) -> np.ndarray:
    if marginal == "uniform":
        return g.uniform(0.0, 1.0, size=(n, d))
    return g.standard_normal((n, d))


def sample_d1(d: int, n: int, rng: Rng, marginal: str = "normal") -> DgpSample:
    """Mutually independent, non-redundant factors; d_eff = d."""
    spec = DgpSpec("D1", d, marginal=marginal)
    if n < 2:
        raise ValueError("need n >= 2")
    z = _marginal_draw(rng.generator(), n, d, marginal)
    return DgpSample(z, d, [], spec)


def sample_d2(d: int, n: int, rho: float, rng: Rng) -> DgpSample:
    """Gaussian factors with equicorrelation rho; linear, non-deterministic
    dependence. d_eff = d (no exact constraints)."""
    spec = DgpSpec("D2", d, rho=rho)
    if n < 2:
        raise ValueError("need n >= 2")
    cov = np.full((d, d), rho)
    np.fill_diagonal(cov, 1.0)
    chol = np.linalg.cholesky(cov)
    z = rng.generator().standard_normal((n, d)) @ chol.T
    return DgpSample(z, d, [], spec)


def sample_d3(d: int, n: int, link: str, rng: Rng, marginal: str = "normal",
              parent: int = 0, child: int = 1) -> DgpSample:
    """One factor is a strictly monotone (invertible) function of another:
    z[child] = link(z[parent]) exactly. d_eff = d - 1."""
    spec = DgpSpec("D3", d, marginal=marginal, parent=parent, child=child, link=link)
    if n < 2:
        raise ValueError("need n >= 2")
    z = _marginal_draw(rng.generator(), n, d, marginal)
    z[:, child] = LINKS[link](z[:, parent])
    return DgpSample(z, d - 1, [(child, (parent,), link)], spec)


def sample_d4(d: int, n: int, synergy: str, rng: Rng, marginal: str = "normal",
              sources: tuple = (0, 1), child: int = 2) -> DgpSample:
    """One factor is a deterministic but synergistic function of two others:
    z[child] = synergy(z[i], z[j]), with pairwise correlations that may all
    vanish. d_eff = d - 1."""
    spec = DgpSpec("D4", d, marginal=marginal, sources=tuple(sources),
                   synergy_child=child, synergy=synergy)
    if n < 2:
        raise ValueError("need n >= 2")
    z = _marginal_draw(rng.generator(), n, d, marginal)
    i, j = sources
    z[:, child] = SYNERGIES[synergy](z[:, i], z[:, j])
    return DgpSample(z, d - 1, [(child, (i, j), synergy)], spec)


def sample(spec: DgpSpec, n: int, rng: Rng) -> DgpSample:
    """Sample from a declarative spec (the harness entry point)."""
    if spec.kind == "D1":
        return sample_d1(spec.d, n, rng, spec.marginal)
    if spec.kind == "D2":
        return sample_d2(spec.d, n, spec.rho, rng)
    if spec.kind == "D3":
        return sample_d3(spec.d, n, spec.link, rng, spec.marginal, spec.parent, spec.child)
    return sample_d4(spec.d, n, spec.synergy, rng, spec.marginal, spec.sources,
                     spec.synergy_child)
