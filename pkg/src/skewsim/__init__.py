"""Monte Carlo toolkit for skew Brownian motion and interface diffusions.

The package simulates one-dimensional skew Brownian motion by three routes
(mollified drift, drift-eliminating space transform, exact reflection), builds
coupled pairs on a shared driver, extends the skew dynamics to a
multidimensional process with a hyperplane interface, and verifies the
simulated laws against closed-form targets for the interface local time.

Submodules
----------
core      deterministic randomness, time grids, Wiener sampling, numerics
stats     Monte Carlo summaries, empirical CDFs, KS distances, trend checks
sbm       skew Brownian path schemes and local-time laws
coupling  shared-driver pairs: ordering, distance identities, moment bounds
gdiff     hyperplane-interface diffusions, inverse local time, continuity
cli       command-line entry points for the experiment suites
"""

from . import cli, core, coupling, gdiff, sbm, stats

__all__ = ["cli", "core", "coupling", "gdiff", "sbm", "stats"]
__version__ = "0.1.0"
