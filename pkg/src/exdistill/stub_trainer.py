"""Deterministic stand-in trainer for orchestration tests and demos.

Speaks the external trainer contract (manifest path as the final argument,
metrics JSON written to the manifest's metrics_path) and reports accuracies
from a profile file instead of training anything:

  {"by_seed": {"17": 0.63}, "by_alpha": {"0.1": 0.2925}, "default": 0.5,
   "test_accuracy": 0.6, "fail_alphas": [0.4], "fail_seeds": [3]}

Lookup order: by_seed, then by_alpha, then default. Seeds or alphas listed in
the fail_* lists make the run exit nonzero, which lets tests exercise failed
trainer handling.

Usage: python -m exdistill.stub_trainer --profile profile.json manifest.json
"""
from __future__ import annotations

import argparse
import json
import sys


def _alpha_key(alpha: float) -> str:
    return f"{alpha:g}"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--profile", required=True, help="accuracy profile JSON")
    parser.add_argument("manifest", help="training manifest JSON")
    args = parser.parse_args(argv)

    with open(args.profile, "r", encoding="utf-8") as handle:
        profile = json.load(handle)
    with open(args.manifest, "r", encoding="utf-8") as handle:
        manifest = json.load(handle)

    alpha = float(manifest["alpha"])
    seed = int(manifest["seed"])
    if alpha in profile.get("fail_alphas", []) or seed in profile.get("fail_seeds", []):
        print(f"stub trainer told to fail for alpha={alpha:g} seed={seed}",
              file=sys.stderr)
        return 3

    by_seed = profile.get("by_seed", {})
    by_alpha = profile.get("by_alpha", {})
    if str(seed) in by_seed:
        dev_accuracy = by_seed[str(seed)]
    elif _alpha_key(alpha) in by_alpha:
        dev_accuracy = by_alpha[_alpha_key(alpha)]
    elif "default" in profile:
        dev_accuracy = profile["default"]
    else:
        print(f"profile holds no accuracy for alpha={alpha:g} seed={seed}",
              file=sys.stderr)
        return 4

    loss_qta = 1.0
    loss_qtr = 0.0 if manifest["mode"] == "st" else 1.0
    metrics = {
        "dev_accuracy": float(dev_accuracy),
        "test_accuracy": profile.get("test_accuracy"),
        "losses": [{
            "loss_qta": loss_qta,
            "loss_qtr": loss_qtr,
            "loss_mt": alpha * loss_qta + (1.0 - alpha) * loss_qtr,
            "alpha": alpha,
        }],
    }
    with open(manifest["metrics_path"], "w", encoding="utf-8") as handle:
        json.dump(metrics, handle, indent=2)
        handle.write("\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
