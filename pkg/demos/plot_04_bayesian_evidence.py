"""
How much does a coincidence move the odds?
==========================================

Posterior odds are prior odds times the likelihood ratio. A striking
likelihood ratio applied to a tiny prior still leaves a small posterior.
"""

import numpy as np

from wardstats import evidence
from wardstats.evidence import EvidenceModel

m = EvidenceModel(prior_p=1e-6, p_e_given_hp=0.99, p_e_given_hd=0.001)
print("likelihood ratio:", evidence.likelihood_ratio(m))
print("posterior:", f"{evidence.posterior(m):.6g}")

###############################################################################
# Sensitivity to the prior, on a log grid
grid = np.logspace(-7, -1, 7)
for row in evidence.prior_sensitivity(m, grid):
    print(f"prior {row['prior']:8.1e} -> posterior {row['posterior']:.4g}")

###############################################################################
# Evidence that is equally likely under both hypotheses changes nothing
flat = EvidenceModel(0.02, 0.3, 0.3)
print("LR = 1 leaves the prior:", evidence.posterior(flat) == 0.02)
