"""Neural-network post-processing of low-cost conservation-law solves.

Small dense networks map local converging inputs — two low-cost numerical
solutions sampled over a local space-time domain of dependence — to
high-fidelity point values of 1D/2D compressible Euler solutions.
"""

__version__ = "0.1.0"
