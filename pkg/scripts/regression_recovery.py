"""How well the normalised OLS recovers planted coefficients as noise grows.

    python3 scripts/regression_recovery.py --n 185 --seeds 200
"""

from __future__ import annotations

import argparse

import numpy as np

from pvauction.stats import ols_normalized, znorm

PLANTED = (6.13, 1.70, -0.24)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=185)
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 0.1, 0.247, 0.5])
    args = ap.parse_args()
    print("sigma  mean_se  se_within_10pct  bias_intercept  bias_pvc6  bias_bcr  rejects_bcr_5pct")
    for sigma in args.sigmas:
        ses, coefs, rej = [], [], 0
        for seed in range(args.seeds):
            rng = np.random.default_rng(seed)
            pvc, bcr = rng.uniform(0.25, 0.6, args.n), rng.uniform(1.2, 6.5, args.n)
            y = PLANTED[0] + PLANTED[1] * znorm(pvc) + PLANTED[2] * znorm(bcr) + rng.normal(0, sigma, args.n)
            fit = ols_normalized(y, pvc, bcr)
            ses.append(fit.residual_se)
            coefs.append([fit.coefficients[k] for k in ("intercept", "pvc6", "bcr")])
            rej += fit.p_values["bcr"] < 0.05
        ses, bias = np.array(ses), np.mean(coefs, axis=0) - PLANTED
        within = np.mean(np.abs(ses - sigma) <= 0.1 * sigma) if sigma > 0 else float(np.all(ses < 1e-9))
        print(f"{sigma:5.3f}  {ses.mean():7.4f}  {within:15.2f}  {bias[0]:14.2e}  {bias[1]:9.2e}  "
              f"{bias[2]:8.2e}  {rej / args.seeds:16.2f}")


if __name__ == "__main__":
    main()
