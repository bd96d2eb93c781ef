"""Lambda of a stable ARMA(1,1) with IED noise, and a simulated path.

For phi = 0.25, theta = 0.5 and noise of class (rho = 1, lam = 1) the psi
weights are 1, 0.75, 0.1875, ... and the limit is 4 + 2 sqrt(3).
"""

import math

from iedtails import IedClass, make_rng
from iedtails.arma import ArmaModel, lambda_limit, psi_expansion, simulate
from iedtails.distributions import ReciprocalExponential
from iedtails.envelope import envelope_report


def main():
    noise = ReciprocalExponential(0.5, 1.0)
    model = ArmaModel(phi=[0.25], theta=[0.5], noise=noise)
    exp = psi_expansion(model, target_tol=1e-14, rho=1.0)
    print(f"K={exp.K} C={exp.C:.4g} beta={exp.beta:.4g} tail bound={exp.truncation_error:.2e}")
    print("psi[:5] =", exp.psi[:5].round(6).tolist())

    cls = lambda_limit(exp, IedClass(1.0, 1.0))
    print(f"Lambda = {cls.lam:.12f} (closed form {4 + 2 * math.sqrt(3):.12f})")

    # the noise used in the path has lam = 0.5, so the envelope level is 0.5 * Lambda
    level_cls = lambda_limit(exp, IedClass(1.0, 0.5))
    traj = simulate(model, 200_000, make_rng(7))
    rep = envelope_report(traj, level_cls, (1000, 200_000))
    s = rep.summary()
    print(f"theoretical level {rep.theoretical_level:.3f}, window minimum {s['min_on_window']:.3f}")


if __name__ == "__main__":
    main()
