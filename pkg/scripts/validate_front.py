#!/usr/bin/env python3
"""
Validate a front CSV against its instance.

Checks every row for feasibility (bounds, linear rows and cardinality), the
declared support for consistency with the weights, mutual nondominance inside
each support group, and first-order stationarity on the declared support.
Prints a pass/fail summary and exits non-zero when any check fails.

Usage:
    python scripts/validate_front.py --instance instance.json --front front.csv [--theta-tol -1e-7]

Examples:
    # Validate an SFSD output
    python scripts/validate_front.py --instance instances/toy.json --front results/toy/mohyb+sfsd/seed_0.csv

    # Looser stationarity threshold for budget-limited runs
    python scripts/validate_front.py --instance instances/mv.json --front front.csv --theta-tol -1e-5
"""

import argparse
import logging
import os
import sys
from collections import defaultdict

from tqdm import tqdm

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from sparsefront.constraints import build_polyhedron, is_feasible  # noqa: E402
from sparsefront.directions import common_direction  # noqa: E402
from sparsefront.exceptions import SparseFrontError  # noqa: E402
from sparsefront.models import Dominance, compare  # noqa: E402
from sparsefront.objectives import ObjectiveSet  # noqa: E402
from sparsefront.storage import load_instance, read_front_csv  # noqa: E402


def setup_logging(log_file: str = "validate_front.log"):
    """Configure logging to file and console"""
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ]
    )


def validate(instance_path: str, front_path: str, theta_tol: float, check_stationarity: bool = True) -> dict:
    """
    Run every check over the front.

    Args:
        instance_path: Instance JSON file
        front_path: Front CSV file
        theta_tol: Stationarity threshold on the per-support theta
        check_stationarity: Whether to solve the direction subproblem per row

    Returns:
        dict: failure messages per check name
    """
    instance = load_instance(instance_path)
    objectives = ObjectiveSet(instance.model, instance.objectives)
    poly = build_polyhedron(instance.constraints, instance.model)
    points = read_front_csv(front_path, objectives)
    failures = defaultdict(list)

    groups = defaultdict(list)
    for row, point in enumerate(tqdm(points, desc="Checking rows", unit="rows"), start=2):
        report = is_feasible(point.x, poly, instance.s, tol=1e-6)
        if not report:
            failures["feasibility"].append(f"row {row}: {report.summary()}")
        try:
            point.check(instance.s)
        except SparseFrontError as exc:
            failures["support"].append(f"row {row}: {exc}")
            continue
        groups[point.J].append((row, point))
        if check_stationarity:
            try:
                theta = common_direction(point.x, point.J, objectives.jacobian(point.x), poly).theta
            except SparseFrontError as exc:
                failures["stationarity"].append(f"row {row}: {exc}")
                continue
            if theta < theta_tol:
                failures["stationarity"].append(f"row {row}: theta {theta:.3e} below {theta_tol:.1e}")

    for J, members in groups.items():
        for row_a, a in members:
            for row_b, b in members:
                if row_a != row_b and compare(a.F, b.F) is Dominance.DOMINATES:
                    failures["nondominance"].append(f"support {J}: row {row_a} dominates row {row_b}")

    return {"rows": len(points), "supports": len(groups), "failures": dict(failures)}


def main():
    parser = argparse.ArgumentParser(
        description='Validate a sparse front CSV'
    )
    parser.add_argument('--instance', required=True, help='Instance JSON file')
    parser.add_argument('--front', required=True, help='Front CSV file')
    parser.add_argument(
        '--theta-tol',
        type=float,
        default=-1e-7,
        help='Stationarity threshold (default: -1e-7)'
    )
    parser.add_argument(
        '--skip-stationarity',
        action='store_true',
        help='Only check feasibility, supports and nondominance'
    )
    args = parser.parse_args()

    setup_logging()
    try:
        result = validate(args.instance, args.front, args.theta_tol, not args.skip_stationarity)
    except SparseFrontError as e:
        logging.error(f"Validation could not run: {e}")
        sys.exit(e.exit_code)

    logging.info("=" * 60)
    logging.info(f"Rows: {result['rows']}, supports: {result['supports']}")
    for check in ("feasibility", "support", "nondominance", "stationarity"):
        messages = result["failures"].get(check, [])
        status = "PASS" if not messages else f"FAIL ({len(messages)})"
        logging.info(f"{check:>13}: {status}")
        for message in messages[:10]:
            logging.info(f"    {message}")
    logging.info("=" * 60)

    sys.exit(1 if result["failures"] else 0)


if __name__ == "__main__":
    main()
