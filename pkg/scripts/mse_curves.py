"""All five MSE curves for one AR(1) training set, plus where each curve
puts its minimum and what that choice scores under the semi-oracle.

    python3 scripts/mse_curves.py --p 300 --n 300 --trials 200 --output curves.csv
"""

import argparse

import numpy as np

from vbmse.datagen import SyntheticModel, ar1_sigma, generate
from vbmse.moments import fit_moments
from vbmse.selector import (
    GridConfig,
    consistent_curve_values,
    make_curve,
    mc_oracle_trials,
    mse_asymptotic,
    mse_plugin,
    mse_semi_oracle,
    write_curves_csv,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--p", type=int, default=300)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--rho", type=float, default=0.6)
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=200, help="Monte-Carlo trials (0 skips the MC curve)")
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--output", default="mse_curves.csv")
    args = ap.parse_args()

    model = SyntheticModel(ar1_sigma(args.p, args.rho), args.mu, seed=args.seed)
    sm = fit_moments(generate(model, args.n)[0])
    gammas = GridConfig(points=args.points).gammas(sm.mean_eigenvalue)

    cols = {
        "semi_oracle": mse_semi_oracle(sm, model.sigma, gammas, model.sigma_sqrt),
        "plugin": mse_plugin(sm, gammas),
        "asymptotic": mse_asymptotic(model.sigma, args.n, gammas),
        "consistent": consistent_curve_values(sm, gammas),
    }
    if args.trials:
        cols = {"mc_oracle": mc_oracle_trials(model, args.n, gammas, args.trials,
                                              seed=args.seed + 1, with_semi=False).mean(), **cols}
    write_curves_csv(args.output, gammas, cols)

    semi = cols["semi_oracle"]
    best = semi.min()
    print(f"p={args.p} n={args.n} rho={args.rho} grid={gammas[0]:.3g}..{gammas[-1]:.3g} ({gammas.size} points)")
    for name, vals in cols.items():
        c = make_curve(gammas, vals, name, args.n, args.p)
        i = int(np.searchsorted(gammas, c.gamma_opt))
        print(f"{name:>12}: argmin gamma={c.gamma_opt:.4g} (index {i:3d})  semi-oracle score / min = {semi[i] / best:.4f}")
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
