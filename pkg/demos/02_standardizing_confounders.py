"""
Any Gaussian linear SCM has a centralized twin
==============================================

A GL-SCM lets every latent confounder and noise term carry its own mean and
variance. Rescaling each confounder to N(0, 1) and folding all means into
the node biases gives a CGL-SCM over the same graph with exactly the same
observational distribution, and therefore the same answers to every
identifiable query.
"""

import numpy as np

from cglscm import GlScm, gl_to_cgl, observational_dist
from cglscm.benchmarks import FRONTDOOR_GRAPH

gl = GlScm(
    FRONTDOOR_GRAPH,
    T=[[0, 0.5, 0], [0, 0, 0.9], [0, 0, 0]],
    Cprime=[[-0.2, 0, 0.3]],
    mu_u=[1.0],            # U' ~ N(1, 9)
    sigma2_u=[9.0],
    mu_bias=[0.3, 0.1, 0.2],
    mu_eps=[0.05, -0.1, 0.0],
    psi2=[1.0, 0.5, 2.0],
)
cgl = gl_to_cgl(gl)
print("loadings", gl.Cprime, "->", cgl.C)          # scaled by the sd, 3
print("biases  ", gl.mu_bias, "->", cgl.mu)

# P(X) of the GL-SCM computed from its own parameters.
B = np.linalg.inv(np.eye(3) - gl.T)
mean = B.T @ (gl.mu_bias + gl.mu_eps + gl.Cprime.T @ gl.mu_u)
cov = B.T @ (gl.Cprime.T @ np.diag(gl.sigma2_u) @ gl.Cprime + np.diag(gl.psi2)) @ B

d = observational_dist(cgl)
print("max |mean difference|", np.abs(d.mean - mean).max())
print("max |cov difference| ", np.abs(d.cov - cov).max())
