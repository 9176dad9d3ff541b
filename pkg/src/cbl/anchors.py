"""Fixed mapping from assertion anchors to the mathematical results they test.

The same table is published in ``docs/anchors.md``; a test keeps the two in
sync and checks that every assertion a run can emit uses one of these keys.
"""

ANCHORS = {
    "greens-representation": "Closed-form Green's function of Delta_k with Dirichlet walls "
                             "represents the inverse Laplacian",
    "vorticity-stream-identity": "||omega_k||^2 = k^4||psi||^2 + 2k^2||psi'||^2 + ||psi''||^2 "
                                 "and the lower bound it implies",
    "jk-boundedness": "J_k is bounded on L2 uniformly in k",
    "jk-commutator": "[d_y, J_k] is bounded by a constant times |k|",
    "jk-self-adjointness": "J_k is self-adjoint in L2",
    "kernel-norm-decay": "||K_i||_L2 decays like |k|^-2",
    "kernel-derivative-decay": "First-derivative norms of K_i decay like |k|^-1",
    "kernel-mixed-derivative": "Mixed-derivative norms of K_i are bounded uniformly in k",
    "taylor-remainder-bounds": "Pointwise bounds on the Taylor remainder h(y, y') and its "
                               "derivatives in terms of ||W||_H4",
    "enhanced-dissipation": "Linear decay rate of theta_k scales as nu^(1/3)|k|^(2/3)",
    "theta-lyapunov": "E_theta,k is non-increasing along the linearized flow",
    "omega-lyapunov": "E_omega,k grows at most by C0 mu^(-1/3)|k|^(4/3) times the time "
                      "integral of ||theta_k||^2",
    "theta-coercivity": "E_theta,k is comparable to ||theta||^2 + nu^(2/3)|k|^(-2/3)||theta'||^2",
    "nonlinear-stability": "Data inside the threshold budget stay stable: the weighted "
                           "energies remain bounded",
    "nonlinear-decay-envelope": "Nonzero modes decay at least at the enhanced rate "
                                "delta1 lambda^(1/3)",
    "stability-threshold": "A larger dissipation admits larger stable data",
}
