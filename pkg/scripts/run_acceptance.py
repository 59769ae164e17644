# run_acceptance.py
import logging
import sys
import os

# Хак для корректной работы импортов
sys.path.append(os.getcwd())

from app.core.logging_config import setup_logging
from app.schemas.config import load_config
from app.services import experiments

logger = logging.getLogger(__name__)

# --- Поставляемые конфигурации: (файл, эксперимент) ---
ACCEPTANCE_RUNS = [
    ("configs/identities_1d.ini", "verify-identities"),
    ("configs/identities_2d.ini", "verify-identities"),
    ("configs/verify_unit_1d.ini", "verify-identities"),
    ("configs/dn_1d.ini", "dn-assemble"),
    ("configs/forward_1d.ini", "forward-solve"),
    ("configs/counterexample_1d.ini", "counterexample"),
    ("configs/counterexample_2d.ini", "counterexample"),
    ("configs/reconstruct_1d.ini", "reconstruct"),
    ("configs/stability_1d.ini", "stability"),
    ("configs/getoor_1d.ini", "convergence-study"),
]


def main(out_root: str = "out/acceptance") -> int:
    """
    Поочерёдно запускает все поставляемые эксперименты и печатает сводку.
    """
    print("--- Acceptance Runner ---")
    print("Starting experiments sequentially...\n")

    failed = []
    total = len(ACCEPTANCE_RUNS)
    for index, (path, name) in enumerate(ACCEPTANCE_RUNS, start=1):
        print(f"\n[{index}/{total}] Running: {name} ({path})...")
        config = load_config(path).with_experiment(name)
        stem = os.path.splitext(os.path.basename(path))[0]
        report = experiments.run(config, out=os.path.join(out_root, stem))
        status = "PASSED" if report.passed else f"FAILED: {', '.join(report.failed_criteria)}"
        print(f"Done in {report.wall_time:.1f}s. {status}")
        if not report.passed:
            failed.append(path)

    if failed:
        print(f"\n--- {len(failed)} of {total} experiments failed: {', '.join(failed)} ---")
        return 1
    print("\n--- All experiments passed! ---")
    return 0


if __name__ == "__main__":
    setup_logging(log_file="")

    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nScript interrupted by user.")
