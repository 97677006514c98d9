#!/usr/bin/env python3
"""
Generate synthetic portfolio instances as instance JSON files.

Writes the three-asset toy instance, random mean-variance instances over a grid
of (n, s) and seeds, and optionally multi-support instances whose two-asset
front is checked against the dense-sampling oracle.

Usage:
    python scripts/generate_instances.py [--out instances/] [--sizes 10 20] [--cardinalities 2 5] [--seeds 0 1 2 3 4]

Examples:
    # Toy instance plus the default mean-variance grid
    python scripts/generate_instances.py

    # Larger universes, one seed
    python scripts/generate_instances.py --sizes 50 100 --cardinalities 5 --seeds 0

    # Multi-support instances with at least 3 optimal supports
    python scripts/generate_instances.py --multi-support 5 --min-supports 3
"""

import argparse
import logging
import os
import sys

from tqdm import tqdm

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from sparsefront.storage import save_instance  # noqa: E402
from sparsefront.synthetic import (  # noqa: E402
    make_mean_variance_instance,
    make_multi_support_instance,
    make_toy_instance,
    support_front_oracle,
)


def setup_logging(log_file: str = "generate_instances.log"):
    """Configure logging to file and console"""
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ]
    )


def generate(out, sizes, cardinalities, seeds, multi_support=0, min_supports=3):
    """
    Write the toy instance, the mean-variance grid and multi-support instances.

    Args:
        out: Output directory
        sizes: Asset counts n
        cardinalities: Cardinality bounds s (pairs with s >= n are skipped)
        seeds: Instance seeds for the mean-variance grid
        multi_support: Number of multi-support instances to keep
        min_supports: Oracle supports a multi-support instance needs to be kept

    Returns:
        list: paths of the written instance files
    """
    written = [save_instance(make_toy_instance(), os.path.join(out, "toy.json"))]

    grid = [(n, s, seed) for n in sizes for s in cardinalities for seed in seeds if s < n]
    for n, s, seed in tqdm(grid, desc="Mean-variance instances", unit="instances"):
        instance = make_mean_variance_instance(n, s, seed)
        written.append(save_instance(instance, os.path.join(out, f"{instance.name}.json")))

    seed = 0
    kept = 0
    attempts = 0
    while kept < multi_support and attempts < 50 * max(1, multi_support):
        instance = make_multi_support_instance(8, seed)
        seed += 1
        attempts += 1
        supports = support_front_oracle(instance)
        if len(supports) < min_supports:
            logging.info(f"{instance.name}: only {len(supports)} optimal supports, skipped")
            continue
        written.append(save_instance(instance, os.path.join(out, f"{instance.name}.json")))
        logging.info(f"{instance.name}: {len(supports)} optimal supports {sorted(supports)}")
        kept += 1
    if kept < multi_support:
        logging.warning(f"Only {kept} of {multi_support} multi-support instances were found")
    return written


def main():
    parser = argparse.ArgumentParser(
        description='Generate synthetic sparse portfolio instances'
    )
    parser.add_argument(
        '--out',
        default='instances',
        help='Output directory (default: instances)'
    )
    parser.add_argument(
        '--sizes',
        type=int,
        nargs='+',
        default=[10, 20],
        help='Asset counts n (default: 10 20)'
    )
    parser.add_argument(
        '--cardinalities',
        type=int,
        nargs='+',
        default=[2, 5],
        help='Cardinality bounds s (default: 2 5)'
    )
    parser.add_argument(
        '--seeds',
        type=int,
        nargs='+',
        default=[0, 1, 2, 3, 4],
        help='Instance seeds (default: 0 1 2 3 4)'
    )
    parser.add_argument(
        '--multi-support',
        type=int,
        default=0,
        help='Number of multi-support instances (n=8, s=2) to generate (default: 0)'
    )
    parser.add_argument(
        '--min-supports',
        type=int,
        default=3,
        help='Keep a multi-support instance only if its oracle front has this many supports (default: 3)'
    )
    args = parser.parse_args()

    setup_logging()
    logging.info("=" * 60)
    logging.info("Generating instances")
    logging.info(f"Output: {args.out}")
    logging.info(f"Sizes: {args.sizes}, cardinalities: {args.cardinalities}, seeds: {args.seeds}")
    logging.info("=" * 60)

    written = generate(
        args.out, args.sizes, args.cardinalities, args.seeds, args.multi_support, args.min_supports
    )

    logging.info(f"Wrote {len(written)} instances to {args.out}")


if __name__ == "__main__":
    main()
