"""Normal-frame curvature of curves in the Lagrangian Grassmannian of the plane.

A line field span{phi(t) e + f} has a unique (up to sign) section v with
sigma(v, v') constant; then v'' = k v and k is the only invariant.  In the
basis (e_{m(rho)}, e_rho) with delta = [[0,0],[1,0]] the normal frame is
Gamma = [v, v'] and its structure function is [[0, k], [1, 0]], so the
curvature map at ((1,-1),(1,1)) equals k = -S(phi)/2 (S = Schwarzian).

Writes the Taylor coefficients of k at t = 0 for a few phi.
"""

import json
import sympy as sp

t = sp.symbols("t")
ORDER = 6

CASES = {
    "tan": sp.tan(t),
    "t_plus_t2": t + t**2,
    "cubic": t + t**3 / 3 + t**2 / 2,
}


def curvature(phi):
    x = sp.Matrix([phi, 1])
    xp = x.diff(t)
    # sigma(e, f) = 1
    w = x[0] * xp[1] - x[1] * xp[0]
    sign = 1 if w.subs(t, 0) > 0 else -1
    v = x / sp.sqrt(sign * w)
    k = v.diff(t, 2)[1] / v[1]
    # cross-check against the Schwarzian at a few points
    d1, d2, d3 = (sp.diff(phi, t, i) for i in (1, 2, 3))
    schwarz = d3 / d1 - sp.Rational(3, 2) * (d2 / d1) ** 2
    for x0 in (sp.Rational(1, 10), sp.Rational(-1, 7), sp.Rational(1, 5)):
        assert abs(sp.N((k + schwarz / 2).subs(t, x0), 30)) < 1e-25
    return k


out = {}
for name, phi in CASES.items():
    k = curvature(phi)
    ser = sp.series(k, t, 0, ORDER + 1).removeO()
    coeffs = [str(sp.nsimplify(ser.coeff(t, i))) for i in range(ORDER + 1)]
    phi_ser = sp.series(phi, t, 0, 20).removeO()
    out[name] = {
        "phi": [str(phi_ser.coeff(t, i)) for i in range(20)],
        "k": coeffs,
    }

with open(__file__.replace(".py", ".json"), "w") as fh:
    json.dump(out, fh, indent=1)
print(json.dumps(out, indent=1))
