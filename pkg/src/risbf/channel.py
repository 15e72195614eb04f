"""Saleh-Valenzuela mmWave channel generation for the BS-RIS-user geometry.

Clustered channels with UPA array responses on both ends of the BS-RIS link
and on the RIS side of the RIS-user links.  Distance-dependent path loss with
log-normal shadowing is folded into the ray gain variance.
"""

from dataclasses import dataclass

import numpy as np

# Scenario geometry (meters): BS at origin, RIS at (d_ris, RIS_Y), users
# uniform in a disc of radius USER_RADIUS centered at (USER_CENTER_X, 0).
RIS_Y = 10.0
USER_CENTER_X = 100.0
USER_RADIUS = 5.0

# Laplacian per-ray angular offset around the cluster center, std in radians.
RAY_ANGLE_STD = np.deg2rad(5.0)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array: `rows x cols` elements, spacing in wavelengths."""

    rows: int
    cols: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("UPA dimensions must be positive")
        if self.spacing_over_wavelength <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def size(self):
        return self.rows * self.cols


@dataclass(frozen=True)
class ClusterSpec:
    """Cluster/ray counts for the clustered channel model."""

    num_clusters: int = 2
    rays_per_cluster: int = 5

    def __post_init__(self):
        if self.num_clusters < 1 or self.rays_per_cluster < 1:
            raise ValueError("cluster and ray counts must be >= 1")


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss in dB: intercept + 10*slope*log10(d) + shadowing."""

    intercept_db: float = 72.0
    slope: float = 2.92
    shadowing_std_db: float = 8.7

    def __post_init__(self):
        if self.slope <= 0:
            raise ValueError("path loss slope must be positive")


@dataclass
class ChannelSet:
    """One channel realization.

    G is the BS-to-RIS matrix (F x M).  h holds the RIS-to-user vectors as
    rows (K x F), stored unconjugated: user k's row channel is h[k].conj().
    noise_powers are the K receiver noise variances in linear watts.
    """

    G: np.ndarray
    h: np.ndarray
    noise_powers: np.ndarray

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=np.complex128)
        self.h = np.asarray(self.h, dtype=np.complex128)
        self.noise_powers = np.asarray(self.noise_powers, dtype=np.float64)
        if self.h.ndim != 2 or self.G.ndim != 2:
            raise ValueError("h must be K x F and G must be F x M")
        if self.h.shape[1] != self.G.shape[0]:
            raise ValueError("RIS dimension mismatch between h and G")
        if self.noise_powers.shape != (self.h.shape[0],):
            raise ValueError("need one noise power per user")
        if not (np.isfinite(self.G).all() and np.isfinite(self.h).all()):
            raise ValueError("channel entries must be finite")

    @property
    def num_users(self):
        return self.h.shape[0]

    @property
    def num_ris(self):
        return self.G.shape[0]

    @property
    def num_bs(self):
        return self.G.shape[1]


def upa_response(phi, delta, geom):
    """UPA array response for azimuth `phi` and elevation `delta` (radians).

    Entry (o, p), with 0 <= o < rows and 0 <= p < cols, equals
    exp(j*2*pi*spacing*(o*sin(phi)*sin(delta) + p*cos(delta))) / sqrt(rows*cols).
    The returned vector is flattened row-major over (o, p): index = o*cols + p.
    """
    o = np.arange(geom.rows)
    p = np.arange(geom.cols)
    arg = 2.0 * np.pi * geom.spacing_over_wavelength * (
        o[:, None] * (np.sin(phi) * np.sin(delta)) + p[None, :] * np.cos(delta)
    )
    return np.exp(1j * arg).ravel() / np.sqrt(geom.size)


def path_loss_db(d, model, shadowing=0.0):
    """Path loss in dB at distance `d` meters with a fixed shadowing draw."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return model.intercept_db + 10.0 * model.slope * np.log10(d) + shadowing


def _draw_ray_angles(spec, rng):
    """Per-ray (azimuth, elevation): cluster centers plus Laplacian offsets."""
    ncl, nray = spec.num_clusters, spec.rays_per_cluster
    az_center = rng.uniform(0.0, 2.0 * np.pi, size=ncl)
    el_center = rng.uniform(0.0, np.pi, size=ncl)
    # Laplace scale b gives std sqrt(2)*b.
    b = RAY_ANGLE_STD / np.sqrt(2.0)
    az = az_center[:, None] + rng.laplace(0.0, b, size=(ncl, nray))
    el = el_center[:, None] + rng.laplace(0.0, b, size=(ncl, nray))
    return az.ravel(), el.ravel()


def assemble_cluster_channel(rx_angles, tx_angles, gains, rx_geom, tx_geom, scale):
    """Sum of `scale * gain * a_rx a_tx^H` over rays, from explicit draws.

    `rx_angles`/`tx_angles` are (azimuth, elevation) arrays of equal length.
    With `tx_geom` None the transmit side degenerates to the scalar 1 and the
    result is a length rx_geom.size vector.
    """
    gains = np.asarray(gains, dtype=np.complex128)
    rx_az, rx_el = rx_angles
    n_rays = len(gains)
    a_rx = np.stack([upa_response(rx_az[i], rx_el[i], rx_geom) for i in range(n_rays)])
    if tx_geom is None:
        return scale * (gains[:, None] * a_rx).sum(axis=0)
    tx_az, tx_el = tx_angles
    a_tx = np.stack([upa_response(tx_az[i], tx_el[i], tx_geom) for i in range(n_rays)])
    return scale * np.einsum("r,rf,rm->fm", gains, a_rx, a_tx.conj())


def sample_cluster_channel(tx_geom, rx_geom, spec, gain_scale, rng):
    """Draw one clustered channel; matrix (rx.size x tx.size), or a vector
    of length rx.size when `tx_geom` is None.

    Ray gains are CN(0, 1) scaled by `gain_scale`, which carries both the
    sqrt(elements / (num_clusters * rays_per_cluster)) normalization and the
    path loss amplitude.
    """
    if gain_scale <= 0:
        raise ValueError("gain_scale must be positive")
    n_rays = spec.num_clusters * spec.rays_per_cluster
    rx_angles = _draw_ray_angles(spec, rng)
    tx_angles = None if tx_geom is None else _draw_ray_angles(spec, rng)
    gains = (rng.standard_normal(n_rays) + 1j * rng.standard_normal(n_rays)) / np.sqrt(2.0)
    return assemble_cluster_channel(rx_angles, tx_angles, gains, rx_geom, tx_geom, gain_scale)


def draw_user_positions(k, rng):
    """K user positions uniform in the disc around (USER_CENTER_X, 0)."""
    r = USER_RADIUS * np.sqrt(rng.uniform(size=k))
    ang = rng.uniform(0.0, 2.0 * np.pi, size=k)
    return np.stack([USER_CENTER_X + r * np.cos(ang), r * np.sin(ang)], axis=1)


def generate_scenario(config, seed, spec=None, path_loss=None):
    """Draw one ChannelSet for `config` (see system.SystemConfig).

    BS at (0, 0), RIS at (ris_distance, 10); users uniform in a disc of
    radius 5 around (100, 0).  Shadowing is drawn once per link.  Pure
    function of (config, seed).
    """
    spec = spec or ClusterSpec()
    path_loss = path_loss or PathLossModel()
    rng = np.random.default_rng(seed)
    n_rays = spec.num_clusters * spec.rays_per_cluster

    users = draw_user_positions(config.k, rng)
    ris_pos = np.array([config.ris_distance, RIS_Y])

    d_bs_ris = float(np.hypot(*ris_pos))
    shadow = rng.normal(0.0, path_loss.shadowing_std_db)
    pl_g = path_loss_db(d_bs_ris, path_loss, shadow)
    scale_g = np.sqrt(config.m * config.f / n_rays) * 10.0 ** (-pl_g / 20.0)
    G = sample_cluster_channel(config.bs_geometry, config.ris_geometry, spec, scale_g, rng)

    h = np.empty((config.k, config.f), dtype=np.complex128)
    for k in range(config.k):
        d_k = float(np.linalg.norm(users[k] - ris_pos))
        shadow_k = rng.normal(0.0, path_loss.shadowing_std_db)
        pl_k = path_loss_db(d_k, path_loss, shadow_k)
        scale_k = np.sqrt(config.f / n_rays) * 10.0 ** (-pl_k / 20.0)
        h[k] = sample_cluster_channel(None, config.ris_geometry, spec, scale_k, rng)

    return ChannelSet(G=G, h=h, noise_powers=config.sigma2.copy())
