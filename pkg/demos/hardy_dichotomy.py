"""Hardy ratios of the three-piece family and the theta = 1/8 dichotomy."""
import math

from mobilemedium.variational import gM_profile, gM_ratio_closed_form, hardy_dichotomy, hardy_ratio


def main():
    for k in (1, 5, 10, 20, 40):
        M = math.exp(k)
        print(f"log M = {k:>2}  ratio {hardy_ratio(gM_profile(M)):.6f}  "
              f"(closed form {gM_ratio_closed_form(M):.6f})")
    for theta in (0.2, 0.125):
        rep = hardy_dichotomy(theta)
        objs = ", ".join(f"{o:.3g}" for o in rep.objectives)
        print(f"theta={theta}: best log M {math.log(rep.best_M):.0f}, objective under "
              f"dilation by 10^0..10^6: {objs}")


if __name__ == "__main__":
    main()
