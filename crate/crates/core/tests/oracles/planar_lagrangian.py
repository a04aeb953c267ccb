"""Symbolic Euler-Lagrange derivation of the planar 2R arm.

Generates the frozen reference values used by tests/planar_oracle.rs.
Conventions: angles from +x, gravity along -y, COM on the link axis,
`inertia` is the link inertia about its COM (z axis).

    python3 planar_lagrangian.py
"""
import sympy as sp

t = sp.symbols("t")
m1, m2, l1, lc1, lc2, i1, i2, g0 = sp.symbols("m1 m2 l1 lc1 lc2 i1 i2 g0", positive=True)
q1, q2 = sp.Function("q1")(t), sp.Function("q2")(t)
q = sp.Matrix([q1, q2])
qd = q.diff(t)

pc1 = sp.Matrix([lc1 * sp.cos(q1), lc1 * sp.sin(q1)])
pc2 = sp.Matrix([l1 * sp.cos(q1) + lc2 * sp.cos(q1 + q2), l1 * sp.sin(q1) + lc2 * sp.sin(q1 + q2)])
vc1, vc2 = pc1.diff(t), pc2.diff(t)
w1, w2 = qd[0], qd[0] + qd[1]

kinetic = sp.Rational(1, 2) * (m1 * vc1.dot(vc1) + m2 * vc2.dot(vc2) + i1 * w1**2 + i2 * w2**2)
potential = g0 * (m1 * pc1[1] + m2 * pc2[1])
lag = kinetic - potential

tau = sp.Matrix([sp.diff(lag.diff(qd[i]), t) - lag.diff(q[i]) for i in range(2)])
qdd = qd.diff(t)

x1, x2, v1, v2, a1, a2 = sp.symbols("x1 x2 v1 v2 a1 a2")
subs = {qdd[0]: a1, qdd[1]: a2}
tau = tau.subs(subs)
tau = tau.subs({qd[0]: v1, qd[1]: v2}).subs({q1: x1, q2: x2})
tau = sp.simplify(tau)

mass = tau.jacobian([a1, a2])
grav = tau.subs({v1: 0, v2: 0, a1: 0, a2: 0})
bias = tau.subs({a1: 0, a2: 0})  # C qd + g
momentum = mass * sp.Matrix([v1, v2])

unit = {m1: 1, m2: 1, l1: 1, lc1: sp.Rational(1, 2), lc2: sp.Rational(1, 2), i1: 1, i2: 1, g0: sp.Rational(981, 100)}


def show(name, expr, point):
    val = sp.N(expr.subs(unit).subs(point), 17)
    print(name, [[float(v) for v in val.row(r)] for r in range(val.rows)])


show("M(0,0)", mass, {x1: 0, x2: 0})
show("g(0,0)", grav, {x1: 0, x2: 0})
show("g(pi/2,0)", grav, {x1: sp.pi / 2, x2: 0})
st = {x1: sp.Rational(3, 10), x2: sp.Rational(-7, 10), v1: sp.Rational(1, 2), v2: sp.Rational(-6, 5)}
show("M(st)", mass, st)
show("bias(st)", bias, st)
show("g(st)", grav, st)
show("P(st)", momentum, st)
# H = -C^T qd + g; with C from Christoffel symbols:
# C_ij = sum_k 1/2 (dM_ij/dq_k + dM_ik/dq_j - dM_jk/dq_i) qd_k
qs, vs = [x1, x2], [v1, v2]
C = sp.zeros(2, 2)
for i in range(2):
    for j in range(2):
        C[i, j] = sum(
            sp.Rational(1, 2) * (mass[i, j].diff(qs[k]) + mass[i, k].diff(qs[j]) - mass[j, k].diff(qs[i])) * vs[k]
            for k in range(2)
        )
show("C(st)", C, st)
show("H(st)", -C.T * sp.Matrix(vs) + grav, st)
# Free fall from the horizontal configuration at rest: M qdd = -g
ff = {x1: 0, x2: 0}
show("qdd_freefall(0,0)", mass.subs(ff).inv() * (-grav.subs(ff)), {})
