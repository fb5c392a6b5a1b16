"""Channel construction: fixtures, Rayleigh fading, one-ring correlation.

Users are numbered 1..K.  The global channel matrix stacks the per-user
row blocks, so a MISO channel is simply one row per user.  All generators
are pure functions of their parameters and seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ChannelParseError, ContractViolation, NumericalError, PreconditionError

#: Midpoint-rule points for the angular integral of the one-ring model.
ONE_RING_QUADRATURE_POINTS = 2048

#: Uniform-linear-array element spacing in wavelengths.
DEFAULT_SPACING = 0.5


@dataclass(frozen=True, eq=False)
class Channel:
    """Global channel matrix plus the per-user receive antenna counts."""

    H: np.ndarray
    nr: tuple[int, ...]

    def __post_init__(self):
        h = np.asarray(self.H, dtype=np.complex128)
        object.__setattr__(self, "H", h)
        nr = tuple(int(v) for v in self.nr)
        object.__setattr__(self, "nr", nr)
        if h.ndim != 2:
            raise ContractViolation(f"H must be 2-D, got shape {h.shape}")
        if len(nr) < 1 or any(v < 1 for v in nr):
            raise ContractViolation(f"receive antenna counts must be >= 1, got {nr}")
        if len(nr) > 16:
            raise ContractViolation("user subsets are 16-bit masks; K must be <= 16")
        if sum(nr) != h.shape[0]:
            raise ContractViolation(
                f"H has {h.shape[0]} rows but antenna counts sum to {sum(nr)}"
            )
        if h.shape[1] < 1:
            raise ContractViolation("channel needs at least one transmit antenna")

    @property
    def K(self) -> int:
        return len(self.nr)

    @property
    def M(self) -> int:
        return self.H.shape[1]

    @property
    def miso(self) -> bool:
        return all(v == 1 for v in self.nr)

    def row_slice(self, user: int) -> slice:
        """Row block of ``user`` (1-based) inside H."""
        if not 1 <= user <= self.K:
            raise ContractViolation(f"user {user} outside 1..{self.K}")
        start = sum(self.nr[: user - 1])
        return slice(start, start + self.nr[user - 1])

    def user_matrix(self, user: int) -> np.ndarray:
        return self.H[self.row_slice(user)]

    def rows_of(self, users: Sequence[int] | int) -> np.ndarray:
        """Stacked row blocks of a user subset (bitmask or iterable), ascending."""
        if isinstance(users, int):
            users = [k + 1 for k in range(self.K) if users >> k & 1]
        blocks = [self.user_matrix(k) for k in sorted(users)]
        if not blocks:
            return np.zeros((0, self.M), dtype=np.complex128)
        return np.concatenate(blocks, axis=0)

    def subchannel(self, users: Sequence[int] | int) -> "Channel":
        """Channel restricted to a user subset (relabelled 1..K')."""
        if isinstance(users, int):
            users = [k + 1 for k in range(self.K) if users >> k & 1]
        users = sorted(users)
        if not users:
            raise ContractViolation("subchannel needs at least one user")
        return Channel(self.rows_of(users), tuple(self.nr[k - 1] for k in users))

    def digest(self) -> str:
        """Short content hash of the serialized channel."""
        return hashlib.sha256(serialize_channel(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class OneRingParams:
    """Geometry of the one-ring scattering model.

    ``theta`` holds the center azimuth of each group (radians), ``delta``
    the one-sided angular spread and ``spacing`` the array element spacing
    in wavelengths.
    """

    delta: float
    theta: tuple[float, ...]
    spacing: float = DEFAULT_SPACING

    def __post_init__(self):
        if self.delta <= 0:
            raise ContractViolation(f"angular spread must be positive, got {self.delta}")
        if len(self.theta) < 1:
            raise ContractViolation("at least one group center angle is required")

    @property
    def groups(self) -> int:
        return len(self.theta)


def two_group_defaults() -> OneRingParams:
    """Two-group geometry used by the ordering experiment.

    Spread 40 degrees, group centers at -pi/3 + delta + pi/3*(g-1).
    """
    delta = 40.0 * np.pi / 180.0
    theta = tuple(-np.pi / 3 + delta + np.pi / 3 * g for g in range(2))
    return OneRingParams(delta=delta, theta=theta)


def _crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def rayleigh(K: int, M: int, seed: int) -> Channel:
    """MISO channel with i.i.d. unit-variance CN(0,1) entries."""
    if K < 1 or M < 1:
        raise PreconditionError(f"need K,M >= 1, got K={K}, M={M}")
    rng = np.random.default_rng(seed)
    return Channel(_crandn(rng, K, M), (1,) * K)


def one_ring_correlation(
    M: int, delta: float, theta: float, spacing: float = DEFAULT_SPACING
) -> np.ndarray:
    """Spatial correlation of a ULA under the one-ring model.

    R(m, n) = (1/2 delta) * integral_{-delta}^{delta}
              exp(-i 2 pi spacing (m - n) sin(theta + a)) da,
    evaluated with a fixed midpoint rule.  The midpoint average of steering
    outer products is PSD by construction, so the eigenvalue clamp below
    only absorbs round-off.
    """
    n_pts = ONE_RING_QUADRATURE_POINTS
    alpha = -delta + (np.arange(n_pts) + 0.5) * (2.0 * delta / n_pts)
    # r[d] for lag d = 0..M-1; Hermitian Toeplitz completes the matrix.
    lags = np.arange(M)
    phase = -2j * np.pi * spacing * np.sin(theta + alpha)
    r = np.exp(np.outer(lags, phase)).mean(axis=1)
    idx = np.subtract.outer(lags, lags)
    corr = np.where(idx >= 0, r[np.abs(idx)], np.conj(r[np.abs(idx)]))
    return corr


def _psd_sqrt(corr: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(corr)
    if eigvals.min() < -1e-8:
        raise NumericalError(
            f"one-ring correlation has eigenvalue {eigvals.min():.3e} < -1e-8"
        )
    root = np.sqrt(np.clip(eigvals, 0.0, None))
    return (eigvecs * root) @ eigvecs.conj().T


def one_ring(
    K: int,
    M: int,
    params: OneRingParams,
    group_of: Sequence[int],
    seed: int,
) -> Channel:
    """MISO channel with per-group one-ring correlated rows.

    ``group_of[k]`` is the 0-based group of user k+1.  Each row is drawn
    as R_g^{1/2} w with w ~ CN(0, I).
    """
    if K < 1 or M < 1:
        raise PreconditionError(f"need K,M >= 1, got K={K}, M={M}")
    group_of = tuple(int(g) for g in group_of)
    if len(group_of) != K:
        raise ContractViolation(f"{len(group_of)} group labels for {K} users")
    if any(g < 0 or g >= params.groups for g in group_of):
        raise ContractViolation(f"group labels must lie in 0..{params.groups - 1}")
    roots = {
        g: _psd_sqrt(one_ring_correlation(M, params.delta, params.theta[g], params.spacing))
        for g in sorted(set(group_of))
    }
    rng = np.random.default_rng(seed)
    rows = np.empty((K, M), dtype=np.complex128)
    for k in range(K):
        rows[k] = roots[group_of[k]] @ _crandn(rng, M)
    return Channel(rows, (1,) * K)


def pathological_three_user(P: float, alpha: float) -> Channel:
    """Three-user MISO channel whose sum-rate gap to capacity is unbounded.

    Rows: [1 0 0], [0 1 0], [P^(a/2) P^(a/2) 1].
    """
    if P <= 0:
        raise PreconditionError(f"P must be positive, got {P}")
    if not 0 < alpha < 1:
        raise PreconditionError(f"alpha must lie in (0, 1), got {alpha}")
    g = float(P) ** (alpha / 2.0)
    h = np.array([[1, 0, 0], [0, 1, 0], [g, g, 1]], dtype=np.complex128)
    return Channel(h, (1, 1, 1))


def triangular_two_user(f: complex, g: complex) -> Channel:
    """Two-user channel in normalized triangular form [[1, 0], [f, g]]."""
    h = np.array([[1, 0], [f, g]], dtype=np.complex128)
    return Channel(h, (1, 1))


def serialize_channel(ch: Channel) -> str:
    """CSV text: header ``K,M,nr_1..nr_K`` then one ``re:im`` row per antenna."""
    lines = [",".join(str(v) for v in (ch.K, ch.M, *ch.nr))]
    for row in ch.H:
        lines.append(",".join(f"{z.real:.17g}:{z.imag:.17g}" for z in row))
    return "\n".join(lines) + "\n"


def save_channel(ch: Channel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(serialize_channel(ch))


def parse_channel(text: str) -> Channel:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ChannelParseError("missing header", 1)
    fields = lines[0].split(",")
    if len(fields) < 3:
        raise ChannelParseError("header needs K,M,nr_1..nr_K", 1)
    try:
        ints = [int(v) for v in fields]
    except ValueError:
        raise ChannelParseError(f"non-integer header field in {fields}", 1) from None
    k, m, nr = ints[0], ints[1], tuple(ints[2:])
    if len(nr) != k:
        raise ChannelParseError(f"header lists {len(nr)} antenna counts for K={k}", 1)
    rows_needed = sum(nr)
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != rows_needed:
        raise ChannelParseError(
            f"expected {rows_needed} antenna rows, found {len(body)}", len(lines)
        )
    h = np.zeros((rows_needed, m), dtype=np.complex128)
    for i, line in enumerate(body):
        lineno = i + 2
        cells = line.split(",")
        if len(cells) != m:
            raise ChannelParseError(f"expected {m} entries, found {len(cells)}", lineno)
        for j, cell in enumerate(cells):
            parts = cell.split(":")
            if len(parts) != 2:
                raise ChannelParseError(
                    f"entry {j + 1} is not in re:im form: {cell!r}", lineno
                )
            try:
                re, im = float(parts[0]), float(parts[1])
            except ValueError:
                raise ChannelParseError(
                    f"entry {j + 1} has a non-numeric component: {cell!r}", lineno
                ) from None
            if not (np.isfinite(re) and np.isfinite(im)):
                raise ChannelParseError(f"entry {j + 1} is not finite: {cell!r}", lineno)
            h[i, j] = complex(re, im)
    return Channel(h, nr)


def load_channel(path) -> Channel:
    with open(path, "r", encoding="ascii") as fh:
        return parse_channel(fh.read())
