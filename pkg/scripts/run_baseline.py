"""Run the bundled cubic baseline experiment."""

import argparse
import json
from importlib.resources import files

from ncft import cli


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/baseline")
    parser.add_argument("--config", default=None,
                        help="config file to use instead of the bundled one")
    args = parser.parse_args()

    if args.config is None:
        raw = json.loads(
            files("ncft").joinpath("configs/cubic-baseline.json").read_text())
    else:
        with open(args.config) as fh:
            raw = json.load(fh)
    cfg = cli.validate_config(raw)
    manifest = cli.run_experiment(cfg, args.out)

    for key, entry in sorted(manifest["checks"].items()):
        if entry["status"] != "not_evaluated":
            print(f"{key} {entry['name']}: {entry['status']}")
    summary = manifest["summary"]
    print(f"{summary['n_events']} events, "
          f"{summary['completed_cycles']} completed cycle(s), "
          f"corrected conservation drift "
          f"{summary['conservation']['corrected']:.3e}")
    print(f"artifacts in {args.out}")


if __name__ == "__main__":
    main()
