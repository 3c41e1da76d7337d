"""Scalar and orientation features derived from 3x3 symmetric diffusion tensors.

The six unique tensor components are eigen-decomposed, and the eigenvalues feed
the rotation-invariant scalars (FA, MD, RD, AD, trace, mode, Westin shape
indices). The principal eigenvector feeds the five-component Knutsson
orientation map, which identifies antipodal directions so that fiber
orientations can be averaged and differentiated; its spatial rate of change is
summarized by an edge map.

Conventions chosen here:
  * Westin indices are the lambda1-normalized variant, so cl + cp + cs = 1.
  * mode is 3*sqrt(6) times the determinant of the unit-norm deviatoric tensor.
  * an all-zero tensor yields all-zero scalars so masked background voxels can
    flow through batch pipelines; the shape indices (which divide by lambda1)
    still reject it at the typed API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError, DegenerateTensorError

COMPONENT_ORDER = ("dxx", "dyy", "dzz", "dxy", "dxz", "dyz")

_SQRT_3_2 = np.sqrt(1.5)
_SQRT_6 = np.sqrt(6.0)
_INV_SQRT_3 = 1.0 / np.sqrt(3.0)

# Euclidean norm of the Knutsson image of any unit vector.
KNUTSSON_NORM = 2.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class DiffusionTensor:
    """Six unique components of a symmetric 3x3 diffusion tensor."""

    dxx: float
    dyy: float
    dzz: float
    dxy: float
    dxz: float
    dyz: float

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.dxx, self.dxy, self.dxz],
                [self.dxy, self.dyy, self.dyz],
                [self.dxz, self.dyz, self.dzz],
            ]
        )


@dataclass(frozen=True)
class TensorEigen:
    """Eigenvalues in descending order with matching unit eigenvectors.

    ``vectors[:, i]`` is the eigenvector for ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def principal_direction(self) -> np.ndarray:
        return self.vectors[:, 0]


@dataclass(frozen=True)
class ScalarMaps:
    fa: float
    md: float
    rd: float
    ad: float
    tr: float
    mode: float


def eigen_decompose(tensor: DiffusionTensor) -> TensorEigen:
    """Eigen-decompose a symmetric tensor; eigenvalues descending."""
    mat = tensor.as_matrix()
    if not np.all(np.isfinite(mat)):
        raise DataValidationError("tensor components must be finite")
    values, vectors = np.linalg.eigh(mat)
    return TensorEigen(values=values[::-1].copy(), vectors=vectors[:, ::-1].copy())


def eigen_decompose_batch(components: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch eigen-decomposition of (n, 6) component rows in COMPONENT_ORDER.

    Returns eigenvalues (n, 3) descending and eigenvectors (n, 3, 3) with
    ``vectors[r, :, i]`` matching ``values[r, i]``.
    """
    components = np.asarray(components, dtype=float)
    if components.ndim != 2 or components.shape[1] != 6:
        raise ValueError("expected an (n, 6) array of tensor components")
    if not np.all(np.isfinite(components)):
        raise DataValidationError("tensor components must be finite")
    dxx, dyy, dzz, dxy, dxz, dyz = components.T
    mats = np.empty((components.shape[0], 3, 3))
    mats[:, 0, 0] = dxx
    mats[:, 1, 1] = dyy
    mats[:, 2, 2] = dzz
    mats[:, 0, 1] = mats[:, 1, 0] = dxy
    mats[:, 0, 2] = mats[:, 2, 0] = dxz
    mats[:, 1, 2] = mats[:, 2, 1] = dyz
    values, vectors = np.linalg.eigh(mats)
    return values[:, ::-1].copy(), vectors[:, :, ::-1].copy()


def _scalar_maps_from_values(lam: np.ndarray) -> tuple[float, float, float, float, float, float]:
    tr = float(lam.sum())
    md = tr / 3.0
    rd = float(lam[1] + lam[2]) / 2.0
    ad = float(lam[0])
    norm = float(np.linalg.norm(lam))
    dev = lam - md
    dev_norm = float(np.linalg.norm(dev))
    # clip compensates eigensolver round-off at the fully-anisotropic limit
    fa = 0.0 if norm == 0.0 else float(np.clip(_SQRT_3_2 * dev_norm / norm, 0.0, 1.0))
    if dev_norm == 0.0:
        mode = 0.0
    else:
        mode = float(3.0 * _SQRT_6 * np.prod(dev / dev_norm))
        mode = float(np.clip(mode, -1.0, 1.0))
    return fa, md, rd, ad, tr, mode


def scalar_maps(eig: TensorEigen) -> ScalarMaps:
    """Rotation-invariant scalars from a descending eigenvalue triple."""
    lam = np.asarray(eig.values, dtype=float)
    if lam[0] < lam[1] or lam[1] < lam[2]:
        raise ValueError("eigenvalues must be sorted descending")
    fa, md, rd, ad, tr, mode = _scalar_maps_from_values(lam)
    return ScalarMaps(fa=fa, md=md, rd=rd, ad=ad, tr=tr, mode=mode)


def scalar_maps_batch(values: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized scalar maps for (n, 3) descending eigenvalue rows."""
    lam = np.asarray(values, dtype=float)
    tr = lam.sum(axis=1)
    md = tr / 3.0
    rd = (lam[:, 1] + lam[:, 2]) / 2.0
    ad = lam[:, 0]
    norm = np.linalg.norm(lam, axis=1)
    dev = lam - md[:, None]
    dev_norm = np.linalg.norm(dev, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        fa = np.where(norm > 0.0, _SQRT_3_2 * dev_norm / np.where(norm > 0, norm, 1.0), 0.0)
        fa = np.clip(fa, 0.0, 1.0)
        unit_dev = dev / np.where(dev_norm > 0, dev_norm, 1.0)[:, None]
    mode = np.where(dev_norm > 0.0, 3.0 * _SQRT_6 * np.prod(unit_dev, axis=1), 0.0)
    mode = np.clip(mode, -1.0, 1.0)
    return {"fa": fa, "md": md, "rd": rd, "ad": ad, "tr": tr, "mode": mode}


def westin_indices(eig: TensorEigen) -> tuple[float, float, float]:
    """Linear/planar/spherical anisotropy shares, normalized by lambda1."""
    l1, l2, l3 = (float(v) for v in eig.values)
    if l1 <= 0.0:
        raise DegenerateTensorError("Westin indices require lambda1 > 0")
    return (l1 - l2) / l1, (l2 - l3) / l1, l3 / l1


def westin_indices_batch(values: np.ndarray) -> np.ndarray:
    """Batch Westin indices (n, 3); rows with lambda1 <= 0 come back all-zero."""
    lam = np.asarray(values, dtype=float)
    l1 = lam[:, 0]
    ok = l1 > 0.0
    denom = np.where(ok, l1, 1.0)
    out = np.stack(
        [(lam[:, 0] - lam[:, 1]) / denom, (lam[:, 1] - lam[:, 2]) / denom, lam[:, 2] / denom],
        axis=1,
    )
    out[~ok] = 0.0
    return out


def knutsson_map(direction: np.ndarray) -> np.ndarray:
    """Map a 3-D direction to its five-component antipodally symmetric image.

    The input is renormalized internally; the zero vector is rejected.
    """
    v = np.asarray(direction, dtype=float)
    if v.shape != (3,):
        raise ValueError("direction must be a 3-vector")
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ValueError("cannot map the zero vector")
    x, y, z = v / norm
    return np.array([x * x - y * y, 2 * x * y, 2 * x * z, 2 * y * z, (2 * z * z - x * x - y * y) * _INV_SQRT_3])


def knutsson_map_batch(directions: np.ndarray) -> np.ndarray:
    """Vectorized Knutsson map for (n, 3) rows; zero rows map to zero output."""
    v = np.asarray(directions, dtype=float)
    norms = np.linalg.norm(v, axis=1)
    safe = np.where(norms > 1e-12, norms, 1.0)
    u = v / safe[:, None]
    x, y, z = u.T
    out = np.stack(
        [x * x - y * y, 2 * x * y, 2 * x * z, 2 * y * z, (2 * z * z - x * x - y * y) * _INV_SQRT_3],
        axis=1,
    )
    out[norms <= 1e-12] = 0.0
    return out


def knutsson_edge_map(field: np.ndarray, spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> np.ndarray:
    """Frobenius norm of the spatial Jacobian of a Knutsson vector lattice.

    ``field`` has shape (nx, ny, nz, 5). Derivatives are central differences
    in the interior and one-sided at lattice boundaries.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 4 or field.shape[3] != 5:
        raise ValueError("field must have shape (nx, ny, nz, 5)")
    if min(field.shape[:3]) < 2:
        raise ValueError("lattice must span at least 2 voxels along every axis")
    sq = np.zeros(field.shape[:3])
    for axis, step in enumerate(spacing):
        grad = np.gradient(field, step, axis=axis)
        sq += np.sum(grad * grad, axis=3)
    return np.sqrt(sq)


def knutsson_edge_map_masked(
    field: np.ndarray,
    mask: np.ndarray,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> np.ndarray:
    """Edge map on a masked lattice, skipping differences across missing voxels.

    Per axis the derivative uses a central difference when both lattice
    neighbors are inside the mask, a one-sided difference when only one is,
    and zero contribution when isolated along that axis.
    """
    field = np.asarray(field, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if field.shape[:3] != mask.shape:
        raise ValueError("mask shape must match the field lattice")
    sq = np.zeros(field.shape[:3])
    for axis, step in enumerate(spacing):
        fwd_ok = np.zeros_like(mask)
        bwd_ok = np.zeros_like(mask)
        sl_all = [slice(None)] * 3
        hi, lo = sl_all.copy(), sl_all.copy()
        hi[axis], lo[axis] = slice(1, None), slice(None, -1)
        fwd_ok[tuple(lo)] = mask[tuple(lo)] & mask[tuple(hi)]
        bwd_ok[tuple(hi)] = mask[tuple(hi)] & mask[tuple(lo)]
        f_fwd = np.zeros_like(field)
        f_bwd = np.zeros_like(field)
        f_fwd[tuple(lo)] = field[tuple(hi)] - field[tuple(lo)]
        f_bwd[tuple(hi)] = field[tuple(hi)] - field[tuple(lo)]
        both = fwd_ok & bwd_ok
        one = fwd_ok ^ bwd_ok
        grad = np.zeros_like(field)
        grad[both] = (f_fwd[both] + f_bwd[both]) / (2.0 * step)
        grad[one & fwd_ok] = f_fwd[one & fwd_ok] / step
        grad[one & bwd_ok] = f_bwd[one & bwd_ok] / step
        sq += np.sum(grad * grad, axis=3)
    sq[~mask] = 0.0
    return np.sqrt(sq)
