"""Robust piecewise-linear percentile normalization.

Fit on training rows only: per column we keep the observed min and max plus the
2.5th and 97.5th percentiles (linear interpolation between order statistics).
Values between the percentile breakpoints scale affinely to [0.025, 0.975];
the tails scale to [0, 0.025) and (0.975, 1]; anything outside the training
range clamps to 0 or 1. Directional columns take the affine image of the same
construction on [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError

P_LO = 0.025
P_HI = 0.975


@dataclass(frozen=True)
class RobustScaler:
    mins: np.ndarray
    p_los: np.ndarray
    p_his: np.ndarray
    maxs: np.ndarray
    directional: np.ndarray
    columns: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.mins)

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        return transform(self, matrix)

    def save(self, path) -> None:
        lines = ["column\tmin\tp_lo\tp_hi\tmax\tdirectional"]
        for c in range(self.dim):
            lines.append(
                "\t".join(
                    [
                        self.columns[c],
                        repr(float(self.mins[c])),
                        repr(float(self.p_los[c])),
                        repr(float(self.p_his[c])),
                        repr(float(self.maxs[c])),
                        "1" if self.directional[c] else "0",
                    ]
                )
            )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "RobustScaler":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        header, rows = lines[0], lines[1:]
        if header.split("\t") != ["column", "min", "p_lo", "p_hi", "max", "directional"]:
            raise DataValidationError("unrecognized scaler sidecar header")
        cols, mins, plos, phis, maxs, dirs = [], [], [], [], [], []
        for row in rows:
            name, mn, plo, phi, mx, dr = row.split("\t")
            cols.append(name)
            mins.append(float(mn))
            plos.append(float(plo))
            phis.append(float(phi))
            maxs.append(float(mx))
            dirs.append(dr == "1")
        return cls(
            mins=np.array(mins),
            p_los=np.array(plos),
            p_his=np.array(phis),
            maxs=np.array(maxs),
            directional=np.array(dirs, dtype=bool),
            columns=tuple(cols),
        )


def fit(matrix: np.ndarray, directional: np.ndarray, columns: tuple[str, ...] | None = None) -> RobustScaler:
    """Fit per-column breakpoints on training rows."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least 2 rows")
    if not np.all(np.isfinite(matrix)):
        raise DataValidationError("cannot fit a scaler on non-finite values")
    directional = np.asarray(directional, dtype=bool)
    if directional.shape != (matrix.shape[1],):
        raise ValueError("directional flags must match the column count")
    if columns is None:
        columns = tuple(f"col{c}" for c in range(matrix.shape[1]))
    p_los, p_his = np.quantile(matrix, [P_LO, P_HI], axis=0)
    scaler = RobustScaler(
        mins=matrix.min(axis=0),
        p_los=p_los,
        p_his=p_his,
        maxs=matrix.max(axis=0),
        directional=directional,
        columns=tuple(columns),
    )
    for block in (scaler.mins, scaler.p_los, scaler.p_his, scaler.maxs, scaler.directional):
        block.flags.writeable = False
    return scaler


def transform(scaler: RobustScaler, matrix: np.ndarray) -> np.ndarray:
    """Apply the fitted piecewise map; never mutates the scaler."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[1] != scaler.dim:
        raise ValueError(f"expected {scaler.dim} columns, got {x.shape}")
    mn, plo, phi, mx = scaler.mins, scaler.p_los, scaler.p_his, scaler.maxs
    low_den = np.where(plo > mn, plo - mn, 1.0)
    mid_den = np.where(phi > plo, phi - plo, 1.0)
    high_den = np.where(mx > phi, mx - phi, 1.0)

    in_mid = (x >= plo) & (x <= phi)
    mid_val = np.where(phi > plo, P_LO + (P_HI - P_LO) * (x - plo) / mid_den, 0.5)
    y = np.select(
        [in_mid, x <= mn, x < plo, x >= mx],
        [mid_val, 0.0, P_LO * (x - mn) / low_den, 1.0],
        default=P_HI + (1.0 - P_HI) * (x - phi) / high_den,
    )
    y = np.where(mx == mn, 0.5, y)
    return np.where(scaler.directional, 2.0 * y - 1.0, y)
