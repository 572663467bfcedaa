"""Steady-state response of a driven two-level atom coupled to the two
counter-propagating traveling modes of a whispering-gallery resonator.

The probe drives the forward mode a through a tapered fiber; coherent surface
scattering at rate h couples a to the backward mode b; the atom couples to
both with the traveling-wave amplitude g_tw.  In the weak-excitation limit
(<sigma_z> -> -1) the expectation values (<sigma->, <a>, <b>) obey a linear
3x3 system whose solution gives the forward transmission

    T_F = |a_out / a_in|^2,   a_out = a_in + sqrt(2 kappa_ex) <a>.

Conventions used throughout the package:

* every rate and detuning is nu = rate/2pi in MHz,
* delta_A = omega_A - omega_p and delta = omega_C - omega_p (probe frame),
  so delta_AC = omega_C - omega_A = delta - delta_A,
* the drive normalization is eps_p = sqrt(2 kappa_ex) a_in, entering the
  mode equation as d<a>/dt = ... - eps_p, which pins the input-output phase:
  at critical coupling (kappa_ex = sqrt(kappa_i^2 + h^2)) the empty-cavity
  on-resonance transmission cancels exactly.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "DegenerateParametersError",
    "SystemParams",
    "SteadyState",
    "Spectrum",
    "EigenSet",
    "critical_kappa_ex",
    "steady_state",
    "forward_transmission",
    "transmission_for_couplings",
    "transmission_spectrum",
    "on_resonance_transmission",
    "lorentzian_center",
    "lorentzian_halfwidth",
    "jc_transmission",
    "eigenvalues",
    "intracavity_photons",
    "calibrate_drive",
]


class DegenerateParametersError(ValueError):
    """Steady-state system is singular (needs zero decay at an exact degeneracy)."""


def critical_kappa_ex(kappa_i, h):
    """Taper decay rate (MHz) at which on-resonance forward transmission vanishes.

    With intermode scattering the critical point is kappa_ex = sqrt(kappa_i^2 + h^2),
    not the single-mode condition kappa_ex = kappa_i.
    """
    if kappa_i < 0:
        raise ValueError("kappa_i must be non-negative")
    return float(np.hypot(kappa_i, h))


@dataclass(frozen=True)
class SystemParams:
    """Rates and detunings of the driven atom + two-mode system (nu = rate/2pi, MHz).

    kappa_ex=None selects critical coupling sqrt(kappa_i^2 + h^2).
    gamma is the dipole decay rate; the excited-state population decays at 2*gamma.
    """

    delta_A: float = 0.0        # atom-probe detuning (omega_A - omega_p)/2pi
    delta: float = 0.0          # cavity-probe detuning (omega_C - omega_p)/2pi
    h: float = 4.9              # intermode scattering rate
    kappa_i: float = 8.28       # intrinsic field decay
    kappa_ex: float | None = None   # taper field decay; None -> critical
    gamma: float = 2.6          # atomic dipole decay
    eps_p: complex = 1.0        # probe drive, sqrt(photons)*MHz
    g_tw: complex = 0.0         # traveling-wave coupling at the atom position

    def __post_init__(self):
        if self.kappa_ex is None:
            object.__setattr__(self, "kappa_ex", critical_kappa_ex(self.kappa_i, self.h))
        for name in ("kappa_i", "kappa_ex", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
        # h is a coherent coupling, not a decay: any finite real sign is allowed
        for name in ("delta_A", "delta", "h"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not (np.isfinite(np.real(self.eps_p)) and np.isfinite(np.imag(self.eps_p))):
            raise ValueError("eps_p must be finite")

    @property
    def kappa(self):
        """Total field decay kappa_i + kappa_ex (MHz)."""
        return self.kappa_i + self.kappa_ex

    @property
    def delta_AC(self):
        """Cavity-atom detuning (omega_C - omega_A)/2pi = delta - delta_A (MHz)."""
        return self.delta - self.delta_A


@dataclass(frozen=True)
class SteadyState:
    """Steady-state expectation values of the linearized system."""

    sigma_minus: complex
    amp_a: complex      # forward traveling mode <a>
    amp_b: complex      # backward traveling mode <b>

    @property
    def amp_A(self):
        """Symmetric normal mode (a + b)/sqrt(2)."""
        return (self.amp_a + self.amp_b) / np.sqrt(2.0)

    @property
    def amp_B(self):
        """Antisymmetric normal mode (a - b)/sqrt(2)."""
        return (self.amp_a - self.amp_b) / np.sqrt(2.0)


@dataclass(frozen=True)
class Spectrum:
    """Forward transmission sampled on a monotone probe-detuning grid."""

    delta_mhz: np.ndarray
    t_f: np.ndarray
    params: SystemParams    # snapshot of the configuration that produced the scan


@dataclass(frozen=True)
class EigenSet:
    """Eigenvalues of the coupled linear system.

    values[j] = frequency + 1j*decay (both MHz), sorted by frequency.
    labels[j] is "atom" or "mode" by dominant eigenvector weight, or None for
    numerically degenerate pairs.  vectors[:, j] is the (sigma, a, b) eigenvector
    belonging to values[j].
    """

    values: np.ndarray
    labels: tuple
    vectors: np.ndarray


def _solve_steady(delta_A, delta, g_tw, h, kappa_i, kappa_ex, gamma, eps_p):
    """Batched solve of the linearized steady-state equations.

    System (rows: sigma-, a, b), all inputs broadcast together:

        (gamma + i dA) s + i g a + i g* b = 0
        (k + i d) a + i h b + i g* s      = -eps_p
        (k + i d) b + i h a + i g s       = 0

    The -eps_p drive together with a_out = a_in + sqrt(2 kappa_ex) a and
    eps_p = sqrt(2 kappa_ex) a_in yields the exact critical-coupling zero.
    """
    kappa = kappa_i + kappa_ex
    dA, d, g, eps = np.broadcast_arrays(
        np.asarray(delta_A, dtype=complex),
        np.asarray(delta, dtype=complex),
        np.asarray(g_tw, dtype=complex),
        np.asarray(eps_p, dtype=complex),
    )
    shape = dA.shape
    M = np.zeros(shape + (3, 3), dtype=complex)
    M[..., 0, 0] = gamma + 1j * dA
    M[..., 0, 1] = 1j * g
    M[..., 0, 2] = 1j * np.conj(g)
    M[..., 1, 0] = 1j * np.conj(g)
    M[..., 1, 1] = kappa + 1j * d
    M[..., 1, 2] = 1j * h
    M[..., 2, 0] = 1j * g
    M[..., 2, 1] = 1j * h
    M[..., 2, 2] = kappa + 1j * d
    rhs = np.zeros(shape + (3,), dtype=complex)
    rhs[..., 1] = -eps
    try:
        sol = np.linalg.solve(M, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise DegenerateParametersError(
            "steady-state system is singular for these parameters"
        ) from exc
    return sol[..., 0], sol[..., 1], sol[..., 2]


def steady_state(params: SystemParams) -> SteadyState:
    """Solve the linearized equations of motion for (<sigma->, <a>, <b>)."""
    s, a, b = _solve_steady(
        params.delta_A, params.delta, params.g_tw,
        params.h, params.kappa_i, params.kappa_ex, params.gamma, params.eps_p,
    )
    return SteadyState(sigma_minus=complex(s), amp_a=complex(a), amp_b=complex(b))


def forward_transmission(params: SystemParams) -> float:
    """Forward transmission T_F = |<a_out>/a_in|^2, normalized off-resonance to 1.

    Independent of |eps_p| in the linear model.  Raises ValueError on zero drive.
    """
    if params.eps_p == 0:
        raise ValueError("forward transmission is undefined at zero drive")
    ss = steady_state(params)
    t = 1.0 + 2.0 * params.kappa_ex * ss.amp_a / params.eps_p
    return abs(t) ** 2


def transmission_for_couplings(params: SystemParams, g_values) -> np.ndarray:
    """Vectorized T_F over an array of traveling-wave couplings.

    Same linear solve as forward_transmission, batched over g_values; used by
    the transit simulator where millions of evaluations are needed.
    """
    if params.eps_p == 0:
        raise ValueError("forward transmission is undefined at zero drive")
    g = np.asarray(g_values, dtype=complex)
    _, a, _ = _solve_steady(
        params.delta_A, params.delta, g,
        params.h, params.kappa_i, params.kappa_ex, params.gamma, params.eps_p,
    )
    t = 1.0 + 2.0 * params.kappa_ex * a / params.eps_p
    return np.abs(t) ** 2


def transmission_spectrum(params: SystemParams, delta_range=(-150.0, 150.0),
                          n_points=601) -> Spectrum:
    """Scan T_F versus probe detuning at fixed atom-cavity detuning.

    Sweeping the probe moves delta and delta_A together; their difference
    delta_AC = delta - delta_A is held at the value implied by params.
    """
    lo, hi = float(delta_range[0]), float(delta_range[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ValueError("delta_range must be a finite increasing interval")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    deltas = np.linspace(lo, hi, int(n_points))
    delta_A = deltas - params.delta_AC
    _, a, _ = _solve_steady(
        delta_A, deltas, params.g_tw,
        params.h, params.kappa_i, params.kappa_ex, params.gamma, params.eps_p,
    )
    t = 1.0 + 2.0 * params.kappa_ex * a / params.eps_p
    return Spectrum(delta_mhz=deltas, t_f=np.abs(t) ** 2, params=params)


def on_resonance_transmission(g_tw, h, kappa_i, kappa_ex, gamma, delta_AC,
                              rtol=1e-9):
    """Closed-form T_F with the probe at the bare cavity (delta = 0), critical coupling.

    Valid only at kappa_ex = sqrt(kappa_i^2 + h^2); enforced to relative
    tolerance rtol.  Evaluates

        T_F = [4 ki^2 |g|^4 + h^2 (g^2 + g*^2)^2]
              / ([gamma (h^2+k^2) + 2 k |g|^2]^2
                 + [delta_AC (h^2+k^2) + h (g^2 + g*^2)]^2)

    which agrees with the steady_state solver (delta = 0, delta_A = -delta_AC)
    to better than 1e-10 relative.  The sign of the cross term follows the
    solver's conventions; see lorentzian_center for the consequence.
    Accepts scalars or broadcastable arrays.
    """
    kex_cr = np.hypot(kappa_i, h)
    if not np.isclose(kappa_ex, kex_cr, rtol=rtol, atol=0.0):
        raise ValueError(
            f"closed form requires critical coupling kappa_ex={kex_cr:.6g}, "
            f"got {kappa_ex:.6g}"
        )
    g = np.asarray(g_tw, dtype=complex)
    dac = np.asarray(delta_AC, dtype=float)
    k = kappa_i + kappa_ex
    s2 = h * h + k * k
    g2 = np.abs(g) ** 2
    gg = 2.0 * np.real(g * g)            # g^2 + g*^2, real
    num = 4.0 * kappa_i**2 * g2**2 + h**2 * gg**2
    den = (gamma * s2 + 2.0 * k * g2) ** 2 + (dac * s2 + h * gg) ** 2
    with np.errstate(invalid="ignore"):
        out = np.where(num == 0.0, 0.0, num / den)
    if out.ndim == 0:
        return float(out)
    return out


def lorentzian_center(g_tw, h, kappa):
    """Center parameter h (g^2 + g*^2)/(h^2 + kappa^2) of the on-resonance line (MHz).

    Note: with the sign conventions of steady_state, the numerically scanned
    T_F(delta_AC) peak sits at MINUS this value; the magnitude, the x-average
    (which vanishes), and the width law are unaffected.
    """
    g = complex(g_tw)
    return h * 2.0 * (g * g).real / (h * h + kappa * kappa)


def lorentzian_halfwidth(g_tw, h, kappa, gamma, form="exact"):
    """Half-width beta of the on-resonance transmission line (MHz).

    form="exact":  gamma + [2 kappa |g|^2 + h (g^2+g*^2)] / (h^2 + kappa^2),
    the distance from delta_AC = 0 to the half-maximum crossing on the far
    side of the peak.  form="approx": 2 |g_tw|^2 / kappa = |g_0|^2/kappa,
    valid when that dominates gamma.
    """
    g = complex(g_tw)
    g2 = abs(g) ** 2
    if form == "exact":
        return gamma + (2.0 * kappa * g2 + h * 2.0 * (g * g).real) / (h * h + kappa * kappa)
    if form == "approx":
        return 2.0 * g2 / kappa
    raise ValueError(f"unknown form {form!r}")


def jc_transmission(g_tw, kappa, gamma, delta_AC):
    """Single-mode model for comparison: T_F of one mode + atom at critical coupling.

    T_F = (|g|^2/kappa)^2 / [(gamma + |g|^2/kappa)^2 + delta_AC^2].
    """
    x = abs(complex(g_tw)) ** 2 / kappa
    if x == 0.0:
        return 0.0
    return x * x / ((gamma + x) ** 2 + delta_AC**2)


def _coefficient_matrix(params: SystemParams) -> np.ndarray:
    g = complex(params.g_tw)
    return np.array([
        [params.gamma + 1j * params.delta_A, 1j * g, 1j * np.conj(g)],
        [1j * np.conj(g), params.kappa + 1j * params.delta, 1j * params.h],
        [1j * g, 1j * params.h, params.kappa + 1j * params.delta],
    ])


def eigenvalues(params: SystemParams, frame="cavity") -> EigenSet:
    """Eigenvalues of the homogeneous linearized system (drive ignored).

    Returned as frequency + 1j*decay in MHz, sorted by frequency.  With
    frame="cavity" frequencies are relative to the bare cavity (the stored
    probe-frame values shifted by -delta); frame="probe" leaves them in the
    probe frame.  The two coincide when delta = 0.
    """
    if frame not in ("cavity", "probe"):
        raise ValueError(f"unknown frame {frame!r}")
    M = _coefficient_matrix(params)
    lam, vec = np.linalg.eig(M)
    shift = params.delta if frame == "cavity" else 0.0
    vals = (lam.imag - shift) + 1j * lam.real     # decay+i*freq -> freq+i*decay
    order = np.argsort(vals.real)
    vals = vals[order]
    vec = vec[:, order]

    scale = max(np.max(np.abs(vals)), 1.0)
    labels = []
    for j in range(3):
        degenerate = any(
            i != j and abs(vals[i] - vals[j]) < 1e-9 * scale for i in range(3)
        )
        if degenerate:
            labels.append(None)
        else:
            labels.append("atom" if np.argmax(np.abs(vec[:, j])) == 0 else "mode")
    return EigenSet(values=vals, labels=tuple(labels), vectors=vec)


def intracavity_photons(params: SystemParams):
    """Coherent intracavity photon numbers (|<a>|^2, |<b>|^2) of the linear model."""
    ss = steady_state(params)
    return abs(ss.amp_a) ** 2, abs(ss.amp_b) ** 2


def calibrate_drive(params: SystemParams, nbar_target) -> float:
    """Drive amplitude eps_p giving the forward mode nbar_target photons.

    The linear model scales quadratically, so the 1-D root solve reduces to
    eps_p = sqrt(nbar_target / nbar_a(eps_p=1)).
    """
    if nbar_target < 0:
        raise ValueError("photon number target must be non-negative")
    n1, _ = intracavity_photons(replace(params, eps_p=1.0 + 0.0j))
    if n1 == 0.0:
        raise DegenerateParametersError("forward mode does not respond to the drive")
    return float(np.sqrt(nbar_target / n1))
