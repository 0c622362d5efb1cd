"""The 1-D counterexample to naive Lipschitz projection of DRO values.

A piecewise-linear loss with modulus 1 near the data but tail slope 1/2:
the naive bound predicts worst-case growth E + eps, the brute-force oracle
shows the true supremum is E + eps/2, because optimal transport moves a
vanishing mass fraction far into the flat tail.
"""

from wdrokit import remark1_oracle
from wdrokit.harness import remark_loss


def main():
    base = remark_loss(2.0)
    print(f"empirical loss at the single atom x=2: {base}")
    print(f"{'eps':>6} {'naive E+eps':>12} {'oracle sup':>12} {'E+eps/2':>10}")
    for eps in (0.01, 0.1, 1.0, 10.0):
        sup = remark1_oracle(eps)
        print(f"{eps:>6} {base + eps:>12.4f} {sup:>12.4f} {base + eps / 2:>10.4f}")


if __name__ == "__main__":
    main()
