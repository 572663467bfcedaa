"""Monte Carlo of falling atoms transiting the evanescent field, with
photon-counting detection.

A drop releases a cold cloud 10 mm above the resonator; atoms arrive after
~45 ms at ~0.44 m/s, each crossing the vertical mode profile in ~2 us.  For
every transit the forward transmission is evaluated quasi-statically along
the trajectory (the cavity responds in ~9 ns, far faster than the atom
moves), binned at the counter resolution, converted to expected photon
counts, and run through a two-detector counting chain.

Reproducibility contract: every drop gets its own counter-based RNG stream
keyed by (master seed, stream index), so results are bit-identical for a
given seed and config no matter how drops are scheduled across processes.

Times: trajectory arrivals in ms after the drop, count bins in us, dead time
in ns.  Distances follow geometry.py (nm near the surface, um for w_z).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import poisson as poisson_dist

from . import geometry as geo
from .model import SystemParams, on_resonance_transmission, transmission_for_couplings

__all__ = [
    "G_GRAV", "CS_MASS", "KB",
    "CloudParams", "AtomTrajectory", "DetectionChain", "CountTimeSeries",
    "TransitEvent", "SweepResult", "HistogramResult",
    "rng_for", "sample_drop", "transit_transmission", "drop_transmission",
    "detect", "threshold_events", "concatenate_series", "simulate_drop",
    "detuning_sweep", "theory_sweep", "cross_correlation", "count_histogram",
]

G_GRAV = 9.81            # m/s^2
CS_MASS = 2.20695e-25    # kg, cesium-133
KB = 1.380649e-23        # J/K


@dataclass(frozen=True)
class CloudParams:
    """Falling-cloud parameters."""

    drop_height: float = 10.0            # mm above the toroid
    cloud_fwhm: float = 3.0              # mm, vertical extent at release
    temperature: float = 10.0            # uK
    mean_transits_per_drop: float = 30.0
    atom_count: float = 2e6              # total atoms in the cloud, bookkeeping only

    def __post_init__(self):
        if self.drop_height <= 0 or self.cloud_fwhm <= 0 or self.temperature <= 0:
            raise ValueError("drop_height, cloud_fwhm and temperature must be positive")
        if self.mean_transits_per_drop < 0 or self.atom_count <= 0:
            raise ValueError("mean_transits_per_drop must be >= 0, atom_count > 0")

    @property
    def fall_velocity(self):
        """Arrival speed sqrt(2 g H) in m/s."""
        return float(np.sqrt(2.0 * G_GRAV * self.drop_height * 1e-3))

    @property
    def fall_time_ms(self):
        """Mean arrival time sqrt(2 H / g) in ms."""
        return float(np.sqrt(2.0 * self.drop_height * 1e-3 / G_GRAV) * 1e3)

    @property
    def velocity_sigma(self):
        """One-dimensional thermal velocity spread sqrt(kB T / m) in m/s."""
        return float(np.sqrt(KB * self.temperature * 1e-6 / CS_MASS))

    @property
    def arrival_sigma_ms(self):
        """Arrival-time spread from cloud size and thermal velocity, ms."""
        sigma_z = self.cloud_fwhm * 1e-3 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        smeared = self.velocity_sigma * self.fall_time_ms * 1e-3
        return float(np.hypot(sigma_z, smeared) / self.fall_velocity * 1e3)


@dataclass(frozen=True)
class AtomTrajectory:
    """One straight-line vertical transit: z(t) = v (t - t0)."""

    rho: float          # nm, radial distance, constant during the transit
    x: float            # nm, azimuthal position, constant during the transit
    v: float            # m/s (equivalently um/us), downward speed
    t0: float           # ms after the drop at which the atom crosses z = 0
    valid: bool = True  # False when inside the van der Waals cutoff

    def z_nm(self, t_us):
        """Vertical offset in nm at absolute time t_us (us after the drop)."""
        return 1e3 * self.v * (np.asarray(t_us, dtype=float) - 1e3 * self.t0)


@dataclass(frozen=True)
class DetectionChain:
    """Photon-counting chain: taper output -> 50:50 splitter -> two SPCMs.

    The absolute flux is anchored at the detectors by c_max, the mean
    combined counts per bin far off resonance; xi and qe are kept for
    consistency checks against the intracavity photon number, not applied
    again on top of c_max.  background_drift > 0 enables a slow Gaussian
    modulation of the background level (an AR(1) process with correlation
    time drift_time_ms), off by default.
    """

    xi: float = 0.70                 # taper-to-detector path efficiency
    qe: float = 0.5                  # detector quantum efficiency
    dark_rate: float = 50.0          # counts/s per detector
    dead_time: float = 50.0          # ns, non-paralyzable, per detector
    bin_dt: float = 2.0              # us, counting bin
    c_max: float = 30.0              # mean combined counts per bin at T_F = 1
    background_mean: float = 0.25    # mean combined counts per bin at T_F = 0
    background_drift: float = 0.0    # relative rms of the slow background drift
    drift_time_ms: float = 5.0       # correlation time of the drift

    def __post_init__(self):
        if not (0.0 <= self.xi <= 1.0 and 0.0 <= self.qe <= 1.0):
            raise ValueError("xi and qe must lie in [0, 1]")
        if self.bin_dt <= 0:
            raise ValueError("bin_dt must be positive")
        if not self.c_max > self.background_mean >= 0.0:
            raise ValueError("need c_max > background_mean >= 0")
        if self.dark_rate < 0 or self.dead_time < 0:
            raise ValueError("dark_rate and dead_time must be non-negative")
        if self.background_drift < 0 or self.drift_time_ms <= 0:
            raise ValueError("background_drift >= 0 and drift_time_ms > 0 required")

    def expected_cmax(self, kappa_ex, nbar0):
        """Combined counts per bin implied by the photon flux, for bookkeeping.

        Off resonance the output flux equals the input flux
        |a_in|^2 = (2 kappa_ex) nbar0 photons/s (angular rate 2 pi nu), so
        the detected combined counts per bin are
        xi * qe * 2 * (2 pi kappa_ex) * nbar0 * bin_dt.  Agreement with the
        configured c_max within ~30% is a consistency check, not an input.
        """
        flux = 2.0 * (2.0 * np.pi * kappa_ex * 1e6) * nbar0       # photons/s
        return float(self.xi * self.qe * flux * self.bin_dt * 1e-6)


@dataclass(frozen=True)
class CountTimeSeries:
    """Two synchronized per-detector count streams on a common bin grid."""

    counts_1: np.ndarray
    counts_2: np.ndarray
    bin_dt: float            # us
    t_start: float = 0.0     # us, absolute time of the left edge of bin 0
    seed: int | None = None  # stream identity, metadata only

    def __post_init__(self):
        c1 = np.asarray(self.counts_1)
        c2 = np.asarray(self.counts_2)
        if c1.shape != c2.shape or c1.ndim != 1:
            raise ValueError("detector streams must be 1-D and of equal length")
        if np.any(c1 < 0) or np.any(c2 < 0):
            raise ValueError("counts must be non-negative")

    @property
    def combined(self):
        return np.asarray(self.counts_1) + np.asarray(self.counts_2)

    @property
    def n_bins(self):
        return len(np.asarray(self.counts_1))

    def bin_times(self):
        """Absolute center times of the bins, us."""
        return self.t_start + (np.arange(self.n_bins) + 0.5) * self.bin_dt


@dataclass(frozen=True)
class TransitEvent:
    """A run of adjacent bins with combined counts above threshold."""

    start_bin: int
    stop_bin: int        # exclusive
    peak_counts: int
    total_counts: int
    t_us: float          # absolute time of the event start


@dataclass(frozen=True)
class SweepResult:
    """Monte Carlo detuning sweep: mean thresholded events per drop."""

    delta_ac: np.ndarray
    events_per_drop: np.ndarray
    stderr: np.ndarray
    n_drops: int
    g0m: float
    c0: int
    normalized: bool
    scale: float = 1.0       # divisor applied when normalized


@dataclass(frozen=True)
class HistogramResult:
    """Empirical P(C) of combined counts per bin with a Poisson reference."""

    counts: np.ndarray       # integer support 0..C_max_observed
    p: np.ndarray
    p_ref: np.ndarray
    mean: float              # empirical mean used unless ref_mean was given
    ref_mean: float
    n_bins: int


def rng_for(seed, stream=0):
    """Counter-based generator for an independent, scheduling-proof stream."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return rng_for(rng)


def sample_drop(cloud: CloudParams, geom: geo.ModeGeometry, rng,
                rho_min=45.0, shell_depth_lb=5.0, rho_fixed=None):
    """Draw the atom trajectories of one drop.

    The transit count is Poisson with the configured mean; arrivals are
    normal around the free-fall time; (rho, x) are uniform over
    [rho_min, rho_min + shell_depth_lb * lambdabar] and one azimuthal
    wavelength.  rho_fixed pins every transit to one radius (used by the
    no-averaging sweeps).  Trajectories failing the van der Waals cutoff are
    dropped from the returned list.
    """
    rng = _as_rng(rng)
    n = int(rng.poisson(cloud.mean_transits_per_drop))
    if n == 0:
        return []
    t0 = rng.normal(cloud.fall_time_ms, cloud.arrival_sigma_ms, n)
    v = cloud.fall_velocity + rng.normal(0.0, cloud.velocity_sigma, n)
    if rho_fixed is None:
        rho = rng.uniform(rho_min, rho_min + shell_depth_lb * geom.lambdabar, n)
    else:
        rho = np.full(n, float(rho_fixed))
    x = rng.uniform(0.0, geom.wavelength, n)
    ok = geo.vdw_cutoff(rho_min)(rho)
    return [
        AtomTrajectory(rho=float(rho[i]), x=float(x[i]), v=float(v[i]),
                       t0=float(t0[i]), valid=True)
        for i in range(n) if ok[i]
    ]


def _require_on_resonance(params: SystemParams):
    if params.delta != 0.0:
        raise ValueError("transit transmission assumes the probe at the bare "
                         "cavity resonance (delta = 0)")


def _transit_bins(traj, geom, bin_dt, window_wz):
    """Global bin indices covered by a transit and its sub-sample times."""
    half_us = window_wz * geom.w_z / abs(traj.v)     # w_z um / (um/us)
    t0_us = 1e3 * traj.t0
    j_lo = int(np.floor((t0_us - half_us) / bin_dt))
    j_hi = int(np.ceil((t0_us + half_us) / bin_dt))
    return np.arange(j_lo, j_hi)


def _coupling_along(traj, geom, t_us):
    z = traj.z_nm(t_us)
    f = geo.mode_profile(geom, np.full_like(np.asarray(t_us, float), traj.rho), z)
    return (geom.g0_surface / np.sqrt(2.0)) * f * np.exp(1j * geom.k * traj.x)


def transit_transmission(traj: AtomTrajectory, geom: geo.ModeGeometry,
                         params: SystemParams, bin_dt=2.0, subsamples=8,
                         window_wz=4.0):
    """Bin-averaged forward transmission along one transit.

    Returns (bin center times in us, T_F per bin).  Each bin averages at
    least 8 quasi-static evaluations of the steady-state transmission at the
    instantaneous coupling.  Bins lie on the global grid [j, j+1) * bin_dt so
    that different transits of a drop share bin boundaries.
    """
    _require_on_resonance(params)
    if not traj.valid:
        raise ValueError("trajectory is inside the van der Waals cutoff")
    if subsamples < 8:
        raise ValueError("need at least 8 sub-samples per bin")
    bins = _transit_bins(traj, geom, bin_dt, window_wz)
    offs = (np.arange(subsamples) + 0.5) / subsamples
    t = (bins[:, None] + offs[None, :]) * bin_dt
    g = _coupling_along(traj, geom, t.ravel())
    tf = transmission_for_couplings(params, g).reshape(t.shape).mean(axis=1)
    return (bins + 0.5) * bin_dt, tf


def drop_transmission(trajs, geom, params: SystemParams, chain: DetectionChain,
                      window_ms=(35.0, 55.0), subsamples=8, window_wz=4.0):
    """Per-bin T_F over one observation window, all transits combined.

    All sub-samples of all transits go through a single batched steady-state
    solve.  In the rare case of overlapping transits the larger single-atom
    transmission wins; genuine two-atom dynamics is out of scope and such
    overlaps are at the percent level for the default rates.
    """
    _require_on_resonance(params)
    start_us = 1e3 * float(window_ms[0])
    stop_us = 1e3 * float(window_ms[1])
    if stop_us <= start_us:
        raise ValueError("empty observation window")
    bin_dt = chain.bin_dt
    n_bins = int(round((stop_us - start_us) / bin_dt))
    tf = np.zeros(n_bins)

    j_first = int(round(start_us / bin_dt))
    offs = (np.arange(subsamples) + 0.5) / subsamples
    all_g, owners = [], []
    for traj in trajs:
        if not traj.valid:
            continue
        bins = _transit_bins(traj, geom, bin_dt, window_wz) - j_first
        keep = (bins >= 0) & (bins < n_bins)
        bins = bins[keep]
        if len(bins) == 0:
            continue
        t = ((bins + j_first)[:, None] + offs[None, :]) * bin_dt
        all_g.append(_coupling_along(traj, geom, t.ravel()))
        owners.append(bins)
    if all_g:
        tf_flat = transmission_for_couplings(params, np.concatenate(all_g))
        pos = 0
        for bins in owners:
            chunk = tf_flat[pos:pos + len(bins) * subsamples]
            pos += len(bins) * subsamples
            np.maximum.at(tf, bins, chunk.reshape(len(bins), subsamples).mean(axis=1))
    return tf, start_us


def detect(tf_bins, chain: DetectionChain, rng, t_start_us=0.0,
           seed_label=None) -> CountTimeSeries:
    """Run a T_F timeline through the two-detector counting chain.

    Expected combined counts per bin are
    background_mean + T_F (c_max - background_mean); each detector draws
    Poisson counts at half that mean plus its dark rate (light and dark are
    independent Poisson processes, so one draw at the summed mean suffices),
    then non-paralyzable dead time thins multi-count bins at sub-bin
    resolution.
    """
    rng = _as_rng(rng)
    tf = np.asarray(tf_bins, dtype=float)
    bg = chain.background_mean
    if chain.background_drift > 0.0 and len(tf) > 0:
        # stationary AR(1) Gaussian modulation, correlation time drift_time_ms
        r = np.exp(-chain.bin_dt / (1e3 * chain.drift_time_ms))
        noise = rng.standard_normal(len(tf))
        level = np.empty(len(tf))
        level[0] = noise[0]
        for i in range(1, len(tf)):
            level[i] = r * level[i - 1] + np.sqrt(1.0 - r * r) * noise[i]
        bg = np.maximum(bg * (1.0 + chain.background_drift * level), 0.0)
    mu = bg + tf * (chain.c_max - chain.background_mean)
    dark = chain.dark_rate * chain.bin_dt * 1e-6
    streams = []
    for _ in range(2):
        c = rng.poisson(mu / 2.0 + dark)
        if chain.dead_time > 0.0:
            c = _apply_dead_time(c, chain, rng)
        streams.append(c.astype(np.int64))
    return CountTimeSeries(counts_1=streams[0], counts_2=streams[1],
                           bin_dt=chain.bin_dt, t_start=t_start_us,
                           seed=seed_label)


def _apply_dead_time(counts, chain, rng):
    """Non-paralyzable dead-time thinning with uniform arrivals inside the bin."""
    bin_ns = chain.bin_dt * 1e3
    out = counts.copy()
    for j in np.nonzero(counts >= 2)[0]:
        times = np.sort(rng.random(counts[j])) * bin_ns
        kept = 1
        last = times[0]
        for t in times[1:]:
            if t - last >= chain.dead_time:
                kept += 1
                last = t
        out[j] = kept
    return out


def threshold_events(series: CountTimeSeries, c0):
    """Runs of adjacent bins whose combined counts reach c0 (one run = one event)."""
    c0 = int(c0)
    if c0 < 1:
        raise ValueError("threshold must be at least 1 count")
    above = series.combined >= c0
    if not above.any():
        return []
    edges = np.flatnonzero(np.diff(np.concatenate(([0], above.view(np.int8), [0]))))
    events = []
    comb = series.combined
    for start, stop in zip(edges[::2], edges[1::2]):
        events.append(TransitEvent(
            start_bin=int(start), stop_bin=int(stop),
            peak_counts=int(comb[start:stop].max()),
            total_counts=int(comb[start:stop].sum()),
            t_us=float(series.t_start + start * series.bin_dt),
        ))
    return events


def concatenate_series(series_list):
    """Join independent drops into one stream for aggregate statistics."""
    if not series_list:
        raise ValueError("nothing to concatenate")
    bin_dt = series_list[0].bin_dt
    if any(s.bin_dt != bin_dt for s in series_list):
        raise ValueError("bin_dt differs between series")
    return CountTimeSeries(
        counts_1=np.concatenate([np.asarray(s.counts_1) for s in series_list]),
        counts_2=np.concatenate([np.asarray(s.counts_2) for s in series_list]),
        bin_dt=bin_dt, t_start=series_list[0].t_start, seed=None,
    )


def simulate_drop(seed, stream, params: SystemParams, geom: geo.ModeGeometry,
                  cloud: CloudParams, chain: DetectionChain,
                  rho_min=45.0, shell_depth_lb=5.0, rho_fixed=None,
                  window_ms=(35.0, 55.0)) -> CountTimeSeries:
    """One full drop: trajectories -> transmission timeline -> counts.

    All randomness of the drop comes from the single stream keyed by
    (seed, stream), so a drop is reproducible in isolation.
    """
    rng = rng_for(seed, stream)
    trajs = sample_drop(cloud, geom, rng, rho_min=rho_min,
                        shell_depth_lb=shell_depth_lb, rho_fixed=rho_fixed)
    tf, t_start = drop_transmission(trajs, geom, params, chain, window_ms)
    return detect(tf, chain, rng, t_start_us=t_start, seed_label=stream)


def _sweep_point(args):
    (idx, dac, g0m, drops, c0, seed, params_base, geom, cloud, chain,
     rho_min, shell_depth_lb, rho_fixed, window_ms) = args
    # realize the requested maximal coupling at the closest accessible radius
    anchor = rho_fixed if rho_fixed is not None else rho_min
    f_anchor = geo.mode_profile(geom, anchor)
    geom_eff = replace(geom, g0_surface=g0m / f_anchor) if g0m > 0 else \
        replace(geom, g0_surface=0.0)
    params = replace(params_base, delta=0.0, delta_A=-dac)
    counts = np.empty(drops)
    for d in range(drops):
        series = simulate_drop(seed, idx * drops + d, params, geom_eff, cloud,
                               chain, rho_min, shell_depth_lb, rho_fixed,
                               window_ms)
        counts[d] = len(threshold_events(series, c0))
    return idx, counts


def detuning_sweep(detunings, g0m, drops, c0=6, seed=0, *,
                   params_base=None, geom=None, cloud=None, chain=None,
                   rho_min=45.0, shell_depth_lb=5.0, rho_fixed=None,
                   window_ms=(35.0, 55.0), normalize=False, jobs=1) -> SweepResult:
    """Mean thresholded events per drop versus atom-cavity detuning.

    g0m is the maximal accessible standing-wave coupling, i.e. the coupling
    at the van der Waals floor (or at rho_fixed when given); the geometry's
    surface coupling is rescaled to realize it.  Per-point Monte Carlo with
    per-drop RNG streams; jobs > 1 parallelizes over sweep points with
    byte-identical results.
    """
    detunings = np.asarray(list(detunings), dtype=float)
    if len(detunings) == 0:
        raise ValueError("no detunings given")
    if np.any(np.abs(detunings) > 200.0):
        raise ValueError("detunings beyond +-200 MHz are outside the model's regime")
    drops = int(drops)
    if drops < 1:
        raise ValueError("need at least one drop per point")
    if g0m < 0:
        raise ValueError("g0m must be non-negative")
    params_base = params_base or SystemParams()
    geom = geom or geo.ModeGeometry()
    cloud = cloud or CloudParams()
    chain = chain or DetectionChain()

    tasks = [
        (i, float(dac), float(g0m), drops, int(c0), int(seed), params_base,
         geom, cloud, chain, rho_min, shell_depth_lb, rho_fixed, window_ms)
        for i, dac in enumerate(detunings)
    ]
    per_point = [None] * len(tasks)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            for idx, counts in pool.map(_sweep_point, tasks):
                per_point[idx] = counts
    else:
        for task in tasks:
            idx, counts = _sweep_point(task)
            per_point[idx] = counts

    means = np.array([c.mean() for c in per_point])
    errs = np.array([c.std(ddof=1) / np.sqrt(drops) if drops > 1 else 0.0
                     for c in per_point])
    scale = 1.0
    if normalize:
        at_zero = np.argmin(np.abs(detunings))
        scale = means[at_zero]
        if scale <= 0:
            raise ValueError("cannot normalize: no events at the zero-detuning point")
        means = means / scale
        errs = errs / scale
    return SweepResult(delta_ac=detunings, events_per_drop=means, stderr=errs,
                       n_drops=drops, g0m=float(g0m), c0=int(c0),
                       normalized=bool(normalize), scale=float(scale))


def theory_sweep(detunings, g0m, averaging="x-rho-t", *, geom=None,
                 kappa_i=8.28, kappa_ex=None, h=4.9, gamma=2.6,
                 rho_min=45.0, shell_depth_lb=5.0,
                 nx=64, nrho=48, nt=33, window_wz=3.0):
    """Deterministic position-averaged on-resonance transmission curve.

    averaging="x-only": the atom sits at the coupling maximum radially and
    vertically; only the azimuthal phase is averaged over one period.
    averaging="x-rho-t": additionally averages uniformly over the radial
    shell [rho_min, rho_min + shell_depth_lb*lambdabar] and over the transit
    (a uniform grid in z across +-window_wz w_z, which weights the coupling
    by the vertical Gaussian the atom actually flies through).
    """
    detunings = np.asarray(list(detunings), dtype=float)
    geom = geom or geo.ModeGeometry()
    if kappa_ex is None:
        kappa_ex = float(np.hypot(kappa_i, h))
    if g0m == 0.0:
        return np.zeros(len(detunings))
    phases = np.exp(2j * np.pi * (np.arange(nx) + 0.5) / nx)
    if averaging == "x-only":
        g = (g0m / np.sqrt(2.0)) * phases
    elif averaging == "x-rho-t":
        g0_surface = g0m / geo.mode_profile(geom, rho_min)
        rho = rho_min + (np.arange(nrho) + 0.5) / nrho * shell_depth_lb * geom.lambdabar
        z = np.linspace(-window_wz, window_wz, nt) * geom.w_z * 1e3
        f = geo.mode_profile(geom, rho[:, None], z[None, :])
        g = (g0_surface / np.sqrt(2.0)) * f[None, :, :] * phases[:, None, None]
    else:
        raise ValueError(f"unknown averaging {averaging!r}")
    out = np.empty(len(detunings))
    for i, dac in enumerate(detunings):
        out[i] = float(np.mean(on_resonance_transmission(
            g, h, kappa_i, kappa_ex, gamma, dac)))
    return out


def cross_correlation(series: CountTimeSeries, max_lag=40.0):
    """Normalized two-detector cross-correlation Gamma(tau) at bin resolution.

    Gamma(tau) = <C1(t) C2(t+tau)> / (<C1><C2>); 1 for independent streams,
    above 1 at short lags when real transits light both detectors together.
    """
    c1 = np.asarray(series.counts_1, dtype=float)
    c2 = np.asarray(series.counts_2, dtype=float)
    m1, m2 = c1.mean(), c2.mean()
    if m1 == 0.0 or m2 == 0.0:
        raise ValueError("cross-correlation undefined for a zero-mean stream")
    lmax = int(round(max_lag / series.bin_dt))
    if lmax >= len(c1):
        raise ValueError("max_lag exceeds the series length")
    lags = np.arange(-lmax, lmax + 1)
    gamma = np.empty(len(lags))
    n = len(c1)
    for i, ell in enumerate(lags):
        if ell >= 0:
            prod = c1[:n - ell] * c2[ell:]
        else:
            prod = c1[-ell:] * c2[:n + ell]
        gamma[i] = prod.mean() / (m1 * m2)
    return lags * series.bin_dt, gamma


def count_histogram(series: CountTimeSeries, window_us=None, ref_mean=None):
    """Empirical P(C) of combined counts per bin, with a Poisson reference.

    window_us = (t_lo, t_hi) restricts to bins whose centers fall inside the
    absolute-time window.  The reference is Poisson at the empirical mean
    unless ref_mean pins it (e.g. to the no-atom background level).
    """
    comb = series.combined
    if window_us is not None:
        t = series.bin_times()
        comb = comb[(t >= window_us[0]) & (t < window_us[1])]
    if len(comb) == 0:
        raise ValueError("empty analysis window")
    mean = float(comb.mean())
    support = np.arange(int(comb.max()) + 1)
    p = np.bincount(comb, minlength=len(support)) / len(comb)
    lam = float(ref_mean) if ref_mean is not None else mean
    p_ref = poisson_dist.pmf(support, lam)
    return HistogramResult(counts=support, p=p, p_ref=p_ref, mean=mean,
                           ref_mean=lam, n_bins=len(comb))
