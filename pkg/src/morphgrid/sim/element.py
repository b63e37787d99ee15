"""Corotational beam element energy.

One element is a two-node spatial beam.  Its strain measures are built in a
corotational frame erected from the current chord and the averaged section
triads of its end nodes, so the energy is exactly invariant under rigid-body
motion: translations cancel in the chord, rotations cancel because the frame
co-rotates.

The element carries an axial eigenstrain and an eigencurvature about its
local e2 axis (bending in the axis/stack-normal plane, positive curling
toward +e3).  Zero energy is attained exactly on the circular arc with that
curvature and stretched length.

Differentiation happens only ever *at* the current configuration: the solver
keeps positions and node triads outside of jax and asks for the gradient and
Hessian with respect to an infinitesimal perturbation ``w`` evaluated at
``w = 0``.  The rotation perturbation therefore uses the second-order Taylor
polynomial of the exponential map — exact for first and second derivatives
at zero — which keeps branches and trig safety tricks out of the AD graph.
Finite rotation updates between iterations are applied multiplicatively by
the solver with the full exponential map.

Perturbation layout (12,): ``[du_i, dtheta_i, du_j, dtheta_j]`` with
rotations acting on the left in the global frame.
"""

from __future__ import annotations

import jax
import jax.numpy as jnp

# props columns fed to the energy
P_L0, P_EA, P_EI2, P_EI3, P_GJ, P_EPS, P_KAPPA = range(7)
N_PROPS = 7


def _hat(v):
    return jnp.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _exp_taylor2(v):
    h = _hat(v)
    return jnp.eye(3) + h + 0.5 * (h @ h)


def element_energy(w, xi, xj, ri, rj, f0, props):
    """Strain energy (N·mm) of one element at perturbation ``w``.

    xi, xj: current end positions (mm).  ri, rj: current node rotations
    (from reference).  f0: reference section triad, columns (e1, e2, e3).
    props: see the ``P_*`` column constants.
    """
    l0 = props[P_L0]
    pi = xi + w[0:3]
    pj = xj + w[6:9]
    tri_i = _exp_taylor2(w[3:6]) @ ri @ f0
    tri_j = _exp_taylor2(w[9:12]) @ rj @ f0

    chord = pj - pi
    clen = jnp.sqrt(chord @ chord)
    g1 = chord / clen
    avg3 = tri_i[:, 2] + tri_j[:, 2]
    g3 = avg3 - (avg3 @ g1) * g1
    g3 = g3 / jnp.sqrt(g3 @ g3)
    g2 = jnp.cross(g3, g1)

    def local_rotation(tri):
        m = jnp.stack([g1, g2, g3], axis=1).T @ tri
        # vee of the skew part: sin(angle)-scaled rotation vector, exact
        # for a pure rotation, no inverse trig in the graph.
        return 0.5 * jnp.array([
            m[2, 1] - m[1, 2],
            m[0, 2] - m[2, 0],
            m[1, 0] - m[0, 1],
        ])

    phi_i = local_rotation(tri_i)
    phi_j = local_rotation(tri_j)

    strain = (clen - l0) / l0
    u_axial = 0.5 * props[P_EA] * l0 * (strain - props[P_EPS]) ** 2

    # stress-free end rotations of the driven arc, in the same sin-scaled
    # measure as phi, so the energy vanishes exactly on the target arc
    a = jnp.sin(0.5 * props[P_KAPPA] * l0)
    b_i = phi_i[1] - a
    b_j = phi_j[1] + a
    u_bend2 = (2.0 * props[P_EI2] / l0) * (b_i * b_i + b_i * b_j + b_j * b_j)
    u_bend3 = (2.0 * props[P_EI3] / l0) * (
        phi_i[2] ** 2 + phi_i[2] * phi_j[2] + phi_j[2] ** 2
    )
    u_torsion = 0.5 * (props[P_GJ] / l0) * (phi_j[0] - phi_i[0]) ** 2
    return u_axial + u_bend2 + u_bend3 + u_torsion


_AXES = (0, 0, 0, 0, 0, 0, 0)
energy_batch = jax.jit(jax.vmap(element_energy, in_axes=_AXES))
grad_batch = jax.jit(jax.vmap(jax.grad(element_energy), in_axes=_AXES))
hessian_batch = jax.jit(jax.vmap(jax.hessian(element_energy), in_axes=_AXES))
