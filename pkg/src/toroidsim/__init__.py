"""Simulation and analysis toolkit for a single atom coupled to the
whispering-gallery modes of a fiber-coupled microtoroid.

Submodules
----------
model     linearized steady-state transmission, closed forms, eigenvalues
mastereq  full Lindblad steady state, used as an independent cross-check
geometry  evanescent mode profile and position-dependent couplings
transit   falling-cloud Monte Carlo, photon counting, sweeps, correlations
fitting   spectrum and linewidth fits, coupling inference
config    run-configuration files
cli       command-line entry points
"""

from .model import (
    DegenerateParametersError,
    SystemParams,
    SteadyState,
    Spectrum,
    EigenSet,
    critical_kappa_ex,
    steady_state,
    forward_transmission,
    transmission_for_couplings,
    transmission_spectrum,
    on_resonance_transmission,
    lorentzian_center,
    lorentzian_halfwidth,
    jc_transmission,
    eigenvalues,
    intracavity_photons,
    calibrate_drive,
)

__version__ = "0.1.0"
