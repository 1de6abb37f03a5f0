"""Nonlinear-interference aware quality-of-transmission estimation.

Integral interference oracle with a persistent coefficient store, a
boosted-tree regressor over spectral features, SNR estimators built on
either, and spectrum-assignment and network-planning applications.

Submodules import compiled kernels on first use; importing this package
stays cheap.
"""

__version__ = "0.1.0"
