"""Active versus Thermal Radiation (TR) mode handset simulator.

Submodules: ``channel`` (Rayleigh multipath, SNR/SINR), ``power`` (frame
constraints, Shannon-inversion power, EE), ``modes`` (signal classification,
mode decisions, RRC machine), ``exposure`` (SAR, power density, skin depth
profiles), ``bioheat`` (explicit Pennes solver), ``scenario`` (two-cell Monte
Carlo) and ``cli``.
"""

__version__ = "0.1.0"
