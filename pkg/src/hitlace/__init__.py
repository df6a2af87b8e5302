"""hitlace: certified intertwining decompositions of Markov chain hitting
times at desk scale.

Subpackages cover stochastic-matrix plumbing (:mod:`hitlace.chains`),
quasi-links and sample-path linking (:mod:`hitlace.links`), block-chain
duals (:mod:`hitlace.blocks`), the pair-merge partition chain
(:mod:`hitlace.moran`), the interlaced-spectra star-chain pipeline
(:mod:`hitlace.interlace`), and the compound-geometric representation
(:mod:`hitlace.compound`).  ``hitlace.cli`` exposes everything as commands.
"""

from . import errors
from .chains import (
    HittingCdf,
    PathSample,
    Spectrum,
    StochasticMatrix,
    check_reversible,
    hitting_time_cdf,
    make_absorbing,
    reversible_spectrum,
    sample_path,
    stationary_distribution,
    validate_stochastic,
)
from .links import (
    IntertwiningCertificate,
    LinkedPathPair,
    QuasiLink,
    certify,
    check_absorption_column,
    compose,
    sample_path_link,
)

__version__ = "0.1.0"
