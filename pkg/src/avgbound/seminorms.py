"""Separating seminorm families on R^d and consistent tensor seminorms.

A family is indexed by ``0..m-1`` (with printable ``labels``).  Every
seminorm acts on the trailing axes of its argument, so batches of vectors
``(..., d)`` produce ``(..., m)`` arrays:

* ``vec(X)``  -> ``|X|^mu``                      shape ``(..., m)``
* ``mat(A)``  -> ``|A|^mu_nu``                   shape ``(..., m, m)``
* ``tens(C)`` -> ``|C|^mu_{nu kappa}``           shape ``(..., m, m, m)``

Consistency means ``|A X|^mu <= |A|^mu_nu |X|^nu`` and
``|C X Y|^mu <= |C|^mu_{nu kappa} |X|^nu |Y|^kappa`` (summed over repeated
indices), which is what :func:`check_family` samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, PartitionError

__all__ = [
    "SeminormFamily",
    "FamilyReport",
    "component_family",
    "partition_family",
    "check_family",
]


@dataclass(frozen=True)
class SeminormFamily:
    d: int
    labels: tuple
    kind: str
    vec: Callable[[np.ndarray], np.ndarray]
    mat: Optional[Callable[[np.ndarray], np.ndarray]] = None
    tens: Optional[Callable[[np.ndarray], np.ndarray]] = None
    blocks: tuple = field(default=())

    @property
    def m(self) -> int:
        return len(self.labels)


def component_family(d: int) -> SeminormFamily:
    """``|X|^i = |X^i|`` with entrywise absolute values on tensors."""
    if not isinstance(d, (int, np.integer)) or d <= 0:
        raise DimensionError(f"dimension must be a positive integer, got {d!r}")
    d = int(d)
    return SeminormFamily(
        d=d,
        labels=tuple(str(i + 1) for i in range(d)),
        kind="component",
        vec=lambda X: np.abs(np.asarray(X, dtype=float)),
        mat=lambda A: np.abs(np.asarray(A, dtype=float)),
        tens=lambda C: np.abs(np.asarray(C, dtype=float)),
        blocks=tuple((i,) for i in range(d)),
    )


def _validate_partition(partition, d):
    blocks = [tuple(int(i) for i in b) for b in partition]
    if not blocks or any(len(b) == 0 for b in blocks):
        raise PartitionError("partition blocks must be nonempty")
    flat = [i for b in blocks for i in b]
    if len(flat) != len(set(flat)):
        raise PartitionError(f"partition blocks overlap: {partition!r}")
    if d is None:
        d = max(flat) + 1
    if sorted(flat) != list(range(d)):
        raise PartitionError(f"partition {partition!r} does not cover indices 0..{d - 1}")
    return tuple(blocks), d


def _scaled_norm(x, axis):
    # Euclidean norm scaled by the largest entry, safe against under/overflow
    big = np.max(np.abs(x), axis=axis, keepdims=True)
    safe = np.where(big > 0, big, 1.0)
    return np.squeeze(big, axis=axis) * np.sqrt(np.sum((x / safe) ** 2, axis=axis))


def partition_family(partition: Sequence[Sequence[int]], d: Optional[int] = None) -> SeminormFamily:
    """Blockwise Euclidean seminorms ``|X|^S = sqrt(sum_{i in S} X_i^2)``.

    ``partition`` holds 0-based index blocks.  Matrix and bilinear seminorms
    are Frobenius norms of the corresponding blocks, which are consistent by
    Cauchy-Schwarz.
    """
    blocks, d = _validate_partition(partition, d)
    idx = [np.array(b) for b in blocks]
    m = len(blocks)

    def vec(X):
        X = np.asarray(X, dtype=float)
        return np.stack([_scaled_norm(X[..., b], -1) for b in idx], axis=-1)

    def mat(A):
        A = np.asarray(A, dtype=float)
        out = np.empty(A.shape[:-2] + (m, m))
        for p, bp in enumerate(idx):
            rows = A[..., bp, :]
            for q, bq in enumerate(idx):
                out[..., p, q] = _scaled_norm(rows[..., bq], (-2, -1))
        return out

    def tens(C):
        C = np.asarray(C, dtype=float)
        out = np.empty(C.shape[:-3] + (m, m, m))
        for p, bp in enumerate(idx):
            for q, bq in enumerate(idx):
                sub = C[..., bp, :, :][..., :, bq, :]
                for r, br in enumerate(idx):
                    out[..., p, q, r] = _scaled_norm(sub[..., br], (-3, -2, -1))
        return out

    labels = tuple("{" + ",".join(str(i + 1) for i in b) + "}" for b in blocks)
    return SeminormFamily(d=d, labels=labels, kind="partition", vec=vec, mat=mat, tens=tens, blocks=blocks)


@dataclass
class FamilyReport:
    trials: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {"trials": self.trials, "passed": self.passed, "violations": self.violations[:50],
                "n_violations": len(self.violations)}


def _random_vectors(rng, n, shape):
    # spread magnitudes over several decades
    scale = 10.0 ** rng.uniform(-3, 3, size=(n,) + (1,) * len(shape))
    return rng.standard_normal((n,) + shape) * scale


def check_family(fam: SeminormFamily, trials: int = 1000, rng_seed: int = 0, rtol: float = 1e-12) -> FamilyReport:
    """Randomized audit of the seminorm axioms and tensor consistency.

    Checks homogeneity, subadditivity, nonnegativity, separation (on the
    canonical basis and on random vectors) and, when the family provides
    them, both consistency inequalities.  Only sampled violations can be
    reported; an empty list is a pass.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    d, m = fam.d, fam.m
    report = FamilyReport(trials=trials)
    bad = report.violations

    X = _random_vectors(rng, trials, (d,))
    Y = _random_vectors(rng, trials, (d,))
    lam = rng.standard_normal(trials) * 10.0 ** rng.uniform(-2, 2, size=trials)

    nX = np.asarray(fam.vec(X))
    nY = np.asarray(fam.vec(Y))
    if np.any(nX < 0):
        bad.append({"axiom": "nonnegativity", "count": int(np.sum(np.any(nX < 0, axis=-1)))})

    lhs = np.asarray(fam.vec(lam[:, None] * X))
    rhs = np.abs(lam)[:, None] * nX
    hom = np.abs(lhs - rhs) > rtol * (1.0 + np.abs(rhs))
    for k in np.flatnonzero(np.any(hom, axis=-1))[:10]:
        bad.append({"axiom": "homogeneity", "lambda": float(lam[k]), "X": X[k].tolist()})
    if hom.any() and np.sum(np.any(hom, axis=-1)) > 10:
        bad.append({"axiom": "homogeneity", "count": int(np.sum(np.any(hom, axis=-1)))})

    nXY = np.asarray(fam.vec(X + Y))
    sub = nXY > nX + nY + rtol * (1.0 + nX + nY)
    for k in np.flatnonzero(np.any(sub, axis=-1))[:10]:
        bad.append({"axiom": "subadditivity", "X": X[k].tolist(), "Y": Y[k].tolist()})

    basis = np.eye(d)
    nb = np.asarray(fam.vec(basis))
    for i in np.flatnonzero(np.all(nb == 0, axis=-1)):
        bad.append({"axiom": "separation", "basis_index": int(i)})
    for k in np.flatnonzero(np.all(nX == 0, axis=-1) & np.any(X != 0, axis=-1))[:10]:
        bad.append({"axiom": "separation", "X": X[k].tolist()})

    if fam.mat is not None:
        A = _random_vectors(rng, trials, (d, d))
        AX = np.einsum("nij,nj->ni", A, X)
        lhs = np.asarray(fam.vec(AX))
        rhs = np.einsum("nmk,nk->nm", np.asarray(fam.mat(A)), nX)
        viol = lhs > rhs * (1.0 + rtol) + rtol
        for k in np.flatnonzero(np.any(viol, axis=-1))[:10]:
            bad.append({"axiom": "matrix_consistency", "A": A[k].tolist(), "X": X[k].tolist()})
    if fam.tens is not None:
        C = _random_vectors(rng, trials, (d, d, d))
        CXY = np.einsum("nijk,nj,nk->ni", C, X, Y)
        lhs = np.asarray(fam.vec(CXY))
        rhs = np.einsum("nmab,na,nb->nm", np.asarray(fam.tens(C)), nX, nY)
        viol = lhs > rhs * (1.0 + rtol) + rtol
        for k in np.flatnonzero(np.any(viol, axis=-1))[:10]:
            bad.append({"axiom": "bilinear_consistency", "C": C[k].tolist(), "X": X[k].tolist(),
                        "Y": Y[k].tolist()})
    return report
