"""Curvature and torsion of space curves, from the classical formulas.

For the arc-length helix (3 cos(s/5), 3 sin(s/5), 4 s/5) the values are
constant.  For the twisted cubic (t, t^2, t^3) the curvature and torsion are
functions of t; we report their value and first arc-length derivative at 0.
"""

import json
import sympy as sp

t = sp.symbols("t")


def kappa_tau(g):
    d1, d2, d3 = (g.diff(t, i) for i in (1, 2, 3))
    c = d1.cross(d2)
    speed = sp.sqrt(d1.dot(d1))
    kappa = sp.sqrt(c.dot(c)) / speed**3
    tau = sp.Matrix.hstack(d1, d2, d3).det() / c.dot(c)
    return kappa, tau, speed


out = {}
helix = sp.Matrix([3 * sp.cos(t / 5), 3 * sp.sin(t / 5), 4 * t / 5])
k, tau, _ = kappa_tau(helix)
out["helix_3_4_5"] = {"curvature": str(sp.nsimplify(sp.N(k.subs(t, 1), 40))), "torsion": str(sp.nsimplify(sp.N(tau.subs(t, 1), 40)))}

cubic = sp.Matrix([t, t**2, t**3])
k, tau, speed = kappa_tau(cubic)
out["twisted_cubic"] = {
    "curvature": [str(sp.nsimplify(k.subs(t, 0))), str(sp.nsimplify((k.diff(t) / speed).subs(t, 0)))],
    "torsion": [str(sp.nsimplify(tau.subs(t, 0))), str(sp.nsimplify((tau.diff(t) / speed).subs(t, 0)))],
}

with open(__file__.replace(".py", ".json"), "w") as fh:
    json.dump(out, fh, indent=1)
print(json.dumps(out, indent=1))
