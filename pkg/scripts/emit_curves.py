"""Write per-u curves (S(u) entries, det S', Heisenberg Wronskians) of the rank-one example to CSV."""
import argparse
from dataclasses import dataclass

from ppwave.checks import write_curves


@dataclass
class Config:
    path: str = "curves.csv"
    samples: int = 101


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--path", default=Config.path)
    p.add_argument("--samples", type=int, default=Config.samples)
    args = p.parse_args(argv)
    cfg = Config(args.path, args.samples)
    write_curves(cfg.path, cfg.samples)
    print(f"wrote {cfg.path}")


if __name__ == "__main__":
    main()
