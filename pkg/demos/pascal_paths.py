"""psi_bar(1, b) for frozen Brownian paths, lines and sinusoids against b = 0."""
import argparse

from mobilemedium import ModelParams, QuadratureSpec
from mobilemedium.functional import pascal_check, standard_test_paths


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-mc", type=int, default=200)
    ap.add_argument("--n-steps", type=int, default=256)
    args = ap.parse_args()
    P = ModelParams(3, 2.0, 1.0, 1.0)
    paths, labels = standard_test_paths(1.0, 3, args.n_steps, seed=11)
    rep = pascal_check(1.0, paths, P, QuadratureSpec(n_steps=args.n_steps), args.n_mc, 5,
                       labels)
    print(f"{'b = 0':<18}{rep.zero.mean:9.3f} +- {rep.zero.stderr:.3f}")
    for lab, e, m in zip(rep.labels, rep.shifted, rep.margins):
        print(f"{lab:<18}{e.mean:9.3f} +- {e.stderr:.3f}   margin {m:+.3f}")
    print("all within 3 combined stderr:", rep.all_passed)


if __name__ == "__main__":
    main()
