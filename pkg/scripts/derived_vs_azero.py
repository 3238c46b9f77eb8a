"""Compare the derived algebra [k, k] with the subalgebra {a = 0} on bundled and random metrics.

Every bracket has a = 0, so [k, k] sits inside {a = 0}. The script reports both
dimensions and whether the inclusion is strict.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from ppwave.checks import analyse, random_plane_wave
from ppwave.documents import bundled_names
from ppwave.killing import a_zero_dimension, derived_algebra_dimension, killing_algebra


@dataclass
class Config:
    random_waves: int = 6
    seed: int = 7


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--random-waves", type=int, default=Config.random_waves)
    p.add_argument("--seed", type=int, default=Config.seed)
    args = p.parse_args(argv)
    cfg = Config(args.random_waves, args.seed)

    print(f"{'metric':28s} {'dim k':>6s} {'dim[k,k]':>9s} {'dim a=0':>8s}  strict")
    cases = [(name, analyse(name).algebra.basis) for name in bundled_names()]
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.random_waves):
        n = int(rng.integers(1, 4))
        cases.append((f"random plane wave {i} (n={n})", killing_algebra(random_plane_wave(rng, n)).basis))
    for label, basis in cases:
        d, z = derived_algebra_dimension(basis), a_zero_dimension(basis)
        print(f"{label:28s} {len(basis):6d} {d:9d} {z:8d}  {d < z}")


if __name__ == "__main__":
    main()
