"""Growth of psi_bar(t, 0) in Regime I against the t^(d/p) law.

    python demos/regime1_rate.py --n-mc 200
"""
import argparse

from mobilemedium import ModelParams, QuadratureSpec, SeedSpec, psi_bar_zero
from mobilemedium.fitting import fit_power
from mobilemedium.special import rho1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-mc", type=int, default=200)
    ap.add_argument("--n-steps", type=int, default=256)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()

    P = ModelParams(1, 0.75, 1.0, 1.0)
    ts = [1e2, 1e3, 1e4]
    ys = []
    for i, t in enumerate(ts):
        e = psi_bar_zero(t, P, QuadratureSpec(n_steps=args.n_steps), args.n_mc,
                         SeedSpec(args.seed).stream(i))
        ys.append(e.mean)
        print(f"t={t:>8.0f}  psi_bar={e.mean:12.3f} +- {e.stderr:8.3f}  "
              f"ratio to t^(4/3) = {e.mean / t ** (4 / 3):.4f}")
    fit = fit_power(ts, ys)
    print(f"fitted exponent {fit.exponent:.4f} (law 4/3), prefactor {fit.prefactor:.4f}, "
          f"limit constant {rho1(1, 0.75, 1.0):.4f}")


if __name__ == "__main__":
    main()
