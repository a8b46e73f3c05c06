"""Linear forward operators, ground-truth phantoms, and the noise model.

Three operators are provided: 1D inpainting (identity with rows removed),
1D periodic Gaussian convolution, and a 2D parallel-beam Radon transform.
Each exposes apply/adjoint built from the same underlying weights, so the
adjoint is the exact transpose.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

__all__ = [
    "DenseOperator",
    "LinearForward",
    "InpaintingOperator",
    "ConvolutionOperator",
    "RadonOperator",
    "inpainting_operator",
    "convolution_operator",
    "radon_operator",
    "phantom_1d",
    "phantom_shepp_logan",
    "make_data",
]


class LinearForward:
    """Matrix-like linear operator with apply/adjoint and a descriptor."""

    shape: tuple[int, int]
    descriptor: dict

    def apply(self, f: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply_to_columns(self, F: np.ndarray) -> np.ndarray:
        """Apply to each column of an n x k matrix."""
        return np.stack([self.apply(F[:, j]) for j in range(F.shape[1])], axis=1)

    def matrix(self) -> np.ndarray:
        """Dense representation; intended for tests and small problems."""
        return self.apply_to_columns(np.eye(self.shape[1]))

    def _check_input(self, v, length, name):
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (length,):
            raise ValueError(f"{name} expects a vector of length {length}, got shape {v.shape}")
        return v


class DenseOperator(LinearForward):
    """Explicit-matrix operator; handy for toy problems and oracles."""

    def __init__(self, matrix: np.ndarray, kind: str = "dense"):
        self._matrix = np.asarray(matrix, dtype=np.float64)
        if self._matrix.ndim != 2:
            raise ValueError("matrix must be 2-dimensional")
        self.shape = self._matrix.shape
        self.descriptor = {"kind": kind, "m": self.shape[0], "n": self.shape[1]}

    def apply(self, f):
        return self._matrix @ self._check_input(f, self.shape[1], "apply")

    def adjoint(self, y):
        return self._matrix.T @ self._check_input(y, self.shape[0], "adjoint")

    def apply_to_columns(self, F):
        return self._matrix @ F

    def matrix(self):
        return self._matrix


class InpaintingOperator(LinearForward):
    """Identity with the rows at removed grid points deleted."""

    def __init__(self, n: int, removed_intervals):
        intervals = [(float(a), float(b)) for a, b in removed_intervals]
        for a, b in intervals:
            if not (0.0 <= a < b <= 1.0):
                raise ValueError(f"interval [{a}, {b}) not inside [0, 1)")
        for (a1, b1) in intervals:
            for (a2, b2) in intervals:
                if (a1, b1) < (a2, b2) and b1 > a2 and b2 > a1:
                    raise ValueError(f"intervals [{a1},{b1}) and [{a2},{b2}) overlap")
        x = np.arange(n) / n
        removed = np.zeros(n, dtype=bool)
        for a, b in intervals:
            removed |= (x >= a) & (x < b)
        self.kept = np.flatnonzero(~removed)
        self.shape = (self.kept.size, n)
        self.descriptor = {"kind": "inpainting", "n": n, "removed_intervals": intervals}

    def apply(self, f):
        return self._check_input(f, self.shape[1], "apply")[self.kept]

    def adjoint(self, y):
        y = self._check_input(y, self.shape[0], "adjoint")
        out = np.zeros(self.shape[1])
        out[self.kept] = y
        return out

    def apply_to_columns(self, F):
        return F[self.kept, :]


class ConvolutionOperator(LinearForward):
    """Circular convolution with a truncated, renormalized Gaussian kernel.

    The kernel is sampled on the grid, truncated at +/- 3 sigma_ker and
    rescaled to unit sum so constant signals are preserved; the operator
    is symmetric.
    """

    def __init__(self, n: int, sigma_ker: float):
        if n < 2:
            raise ValueError(f"n must be >= 2, got {n}")
        if sigma_ker <= 0 or 3.0 * sigma_ker >= 0.5:
            raise ValueError(
                f"need 0 < 3*sigma_ker < 1/2 so the truncated kernel fits one period, "
                f"got sigma_ker={sigma_ker}"
            )
        radius = int(np.floor(3.0 * sigma_ker * n))
        offsets = np.arange(-radius, radius + 1)
        vals = np.exp(-0.5 * (offsets / (n * sigma_ker)) ** 2)
        vals /= vals.sum()
        kernel = np.zeros(n)
        kernel[offsets % n] = vals
        self.kernel = kernel
        self._kernel_hat = np.fft.rfft(kernel)
        self.shape = (n, n)
        self.descriptor = {
            "kind": "convolution",
            "n": n,
            "sigma_ker": sigma_ker,
            "kernel_radius": radius,
            "renormalized": True,
        }

    def apply(self, f):
        f = self._check_input(f, self.shape[1], "apply")
        return np.fft.irfft(np.fft.rfft(f) * self._kernel_hat, self.shape[1])

    adjoint = apply  # even kernel: A = A^T

    def apply_to_columns(self, F):
        return np.fft.irfft(np.fft.rfft(F, axis=0) * self._kernel_hat[:, None], self.shape[1], axis=0)


class RadonOperator(LinearForward):
    """Parallel-beam discrete Radon transform on the square [-1, 1]^2.

    Ray-driven line integrals with bilinear interpolation at step length
    half a pixel; a ray across the image domain of ones integrates to its
    chord length.  Rows are ordered angle-major: ray (i, j) of angle i and
    detector j sits at flat index i * n_detectors + j.  Realized as a
    sparse matrix, so the adjoint is the exact transpose.
    """

    def __init__(self, image_side: int, n_angles: int, n_detectors: int):
        if image_side < 2 or n_angles < 1 or n_detectors < 1:
            raise ValueError("image_side >= 2 and positive angle/detector counts required")
        self.image_side = image_side
        self.n_angles = n_angles
        self.n_detectors = n_detectors
        self.angles = np.arange(n_angles) * np.pi / n_angles
        self.detectors = np.linspace(-1.0, 1.0, n_detectors)
        self.shape = (n_angles * n_detectors, image_side**2)
        self._matrix = self._build_matrix()
        self.descriptor = {
            "kind": "radon",
            "image_side": image_side,
            "n_angles": n_angles,
            "n_detectors": n_detectors,
        }

    def _build_matrix(self) -> sparse.csr_matrix:
        side = self.image_side
        step = 1.0 / side  # half a pixel; pixels have width 2/side
        t = np.arange(-np.sqrt(2.0), np.sqrt(2.0) + step / 2, step)
        rows, cols, vals = [], [], []
        for i, theta in enumerate(self.angles):
            sin_t, cos_t = np.sin(theta), np.cos(theta)
            # ray points: direction (sin, -cos), offset eta along (cos, sin)
            x = t[None, :] * sin_t + self.detectors[:, None] * cos_t
            y = -t[None, :] * cos_t + self.detectors[:, None] * sin_t
            cc = (x + 1.0) * side / 2.0 - 0.5
            rr = (1.0 - y) * side / 2.0 - 0.5
            c0 = np.floor(cc).astype(np.int64)
            r0 = np.floor(rr).astype(np.int64)
            wc = cc - c0
            wr = rr - r0
            ray = np.broadcast_to(
                i * self.n_detectors + np.arange(self.n_detectors)[:, None], cc.shape
            )
            for dr, dc, w in (
                (0, 0, (1 - wr) * (1 - wc)),
                (0, 1, (1 - wr) * wc),
                (1, 0, wr * (1 - wc)),
                (1, 1, wr * wc),
            ):
                r, c = r0 + dr, c0 + dc
                ok = (r >= 0) & (r < side) & (c >= 0) & (c < side)
                rows.append(ray[ok])
                cols.append((r * side + c)[ok])
                vals.append((w * step)[ok])
        mat = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=self.shape,
        )
        return mat.tocsr()

    def apply(self, f):
        return self._matrix @ self._check_input(f, self.shape[1], "apply")

    def adjoint(self, y):
        return self._matrix.T @ self._check_input(y, self.shape[0], "adjoint")

    def apply_to_columns(self, F):
        return self._matrix @ F

    def matrix(self):
        return self._matrix.toarray()

    def sinogram(self, f) -> np.ndarray:
        """Apply and reshape to (n_angles, n_detectors)."""
        return self.apply(np.asarray(f, dtype=np.float64).ravel()).reshape(
            self.n_angles, self.n_detectors
        )


def inpainting_operator(n: int, removed_intervals) -> InpaintingOperator:
    """Identity on the grid x_i = i/n with points in the given [a, b) removed."""
    return InpaintingOperator(n, removed_intervals)


def convolution_operator(n: int, sigma_ker: float) -> ConvolutionOperator:
    """Periodic Gaussian convolution with kernel width sigma_ker."""
    return ConvolutionOperator(n, sigma_ker)


def radon_operator(image_side: int, n_angles: int, n_detectors: int) -> RadonOperator:
    """Parallel-beam Radon transform; angles uniform in [0, pi), detectors in [-1, 1]."""
    return RadonOperator(image_side, n_angles, n_detectors)


def phantom_1d(n: int) -> np.ndarray:
    """Deterministic 1D test signal on x_i = i/n with values in [0, 1].

    Artifact constant: two constant plateaus with jumps (one jump at
    x = 0.12, inside the default inpainting gap), a Gaussian bump centered
    at 0.45 covering the second gap smoothly, and a squared half-sine arch
    on [0.62, 0.92).
    """
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"n must be a power of two >= 2, got {n}")
    x = np.arange(n) / n
    f = np.zeros(n)
    f += 0.9 * ((x >= 0.05) & (x < 0.12))
    f += 0.25 * ((x >= 0.12) & (x < 0.30))
    f += 0.8 * np.exp(-0.5 * ((x - 0.45) / 0.06) ** 2)
    arch = (x >= 0.62) & (x < 0.92)
    f[arch] += 0.7 * np.sin(np.pi * (x[arch] - 0.62) / 0.30) ** 2
    return f


# (intensity, semiaxis a, semiaxis b, x0, y0, rotation degrees); additive,
# background outside the outer ellipse is exactly 0, values stay in [0, 1]
_SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.605, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def phantom_shepp_logan(side: int) -> np.ndarray:
    """Ten-ellipse Shepp-Logan head phantom rasterized at side x side."""
    if side < 2:
        raise ValueError(f"side must be >= 2, got {side}")
    centers = (np.arange(side) + 0.5) * 2.0 / side - 1.0
    x = centers[None, :]
    y = (1.0 - (np.arange(side) + 0.5) * 2.0 / side)[:, None]  # row 0 at top
    img = np.zeros((side, side))
    for amp, a, b, x0, y0, phi_deg in _SHEPP_LOGAN_ELLIPSES:
        phi = np.radians(phi_deg)
        xr = (x - x0) * np.cos(phi) + (y - y0) * np.sin(phi)
        yr = -(x - x0) * np.sin(phi) + (y - y0) * np.cos(phi)
        img += amp * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return np.maximum(img, 0.0)  # clear roundoff from the additive overlays


def make_data(forward: LinearForward, f_true: np.ndarray, relative_level: float, seed):
    """Noisy data y = A f + eps with sigma matched in expectation.

    sigma = relative_level * ||f_true||_2 / sqrt(m), so the realized
    relative noise ||eps|| / ||f_true|| concentrates around the target.
    Returns (y, sigma).
    """
    if relative_level <= 0:
        raise ValueError(f"relative_level must be > 0, got {relative_level}")
    f_true = np.asarray(f_true, dtype=np.float64).ravel()
    m = forward.shape[0]
    sigma = relative_level * np.linalg.norm(f_true) / np.sqrt(m)
    rng = np.random.default_rng(seed)
    y = forward.apply(f_true) + sigma * rng.standard_normal(m)
    return y, float(sigma)
