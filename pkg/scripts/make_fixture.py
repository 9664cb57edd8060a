"""Write a synthetic screening CSV with the public dataset's columns."""

import argparse

from smokerisk.fixtures import write_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output CSV path")
    ap.add_argument("--rows", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--missing-rate", type=float, default=0.0)
    args = ap.parse_args()
    t = write_fixture(args.out, n=args.rows, seed=args.seed, missing_rate=args.missing_rate)
    print(f"wrote {t.n_rows} rows to {args.out}")


if __name__ == "__main__":
    main()
