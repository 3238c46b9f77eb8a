"""Tabulate dim k and dim k/k(V) over the bundled metric documents.

Rows go to stdout as CSV. A plane wave with no decomposability certificate is
expected to show a transversal dimension of at most one.
"""
import argparse
import csv
import sys
from dataclasses import dataclass

from ppwave.checks import analyse
from ppwave.documents import bundled_names


@dataclass
class Config:
    names: tuple = ()


def rows(cfg: Config):
    for name in cfg.names or bundled_names():
        a = analyse(name)
        yield {
            "name": name,
            "n": a.pw.n,
            "dim_k": a.algebra.dimension,
            "dim_k_mod_kV": a.transversal,
            "plane_wave": a.plane_wave,
            "decomposable": a.certificate is not None,
            "min_rank": a.min_rank,
            "spans_tangent": a.homogeneity.spans_tangent,
            "spans_Vperp": a.homogeneity.spans_Vperp,
            "gap": f"{a.algebra.gap:.3g}",
        }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help="bundled document names (default: all)")
    cfg = Config(tuple(p.parse_args(argv).names))
    out = list(rows(cfg))
    w = csv.DictWriter(sys.stdout, fieldnames=list(out[0]))
    w.writeheader()
    w.writerows(out)


if __name__ == "__main__":
    main()
