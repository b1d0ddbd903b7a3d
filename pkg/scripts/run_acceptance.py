import sys
import os
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.append(os.getcwd())

from config import DEFAULTS
from core import io_utils, kernels, pipeline
from core.errors import FracwalkError

OUT_ROOT = Path("outputs/acceptance")
KAPPA = [0.5, 1.0, 2.0]
H_SEQ = [1.0 / 2**m for m in range(3, 8)]
MODELS = {
    "gl": [0.3, 0.5, 1.5, 1.9, 2.0],
    "gw": [0.3, 0.5, 1.0, 1.5, 1.9, 2.0],
    "binom": [0.3, 0.5, 1.0, 1.5, 1.9, 2.0],
}


def run_cf_matrix():
    rows = []
    for model, alphas in MODELS.items():
        name = "lambda" if model == "gw" else "mu"
        for alpha in alphas:
            coeff = 0.25 * kernels.admissible_bound(model, alpha, name)
            print(f"converge {model} alpha={alpha} {name}={coeff:.6g} ...")
            try:
                result = pipeline.run_converge(
                    model,
                    alpha,
                    coeff,
                    KAPPA,
                    H_SEQ,
                    1.0,
                    coeff_name=name,
                    tol=DEFAULTS["converge_tol"],
                    output_dir=str(OUT_ROOT / f"cf_{model}_{alpha:g}"),
                )
            except FracwalkError as exc:
                print(f"  error: {exc}")
                rows.append([model, alpha, "error", str(exc)])
                continue
            worst = result.report.max_errors()
            status = "pass" if result.passed else ("decreasing" if result.report.is_decreasing() else "fail")
            print(f"  max errors {np.array2string(worst, precision=3)} -> {status}")
            rows.append([model, alpha, status, worst.tolist()])

    # tau = lambda h^2 without the log factor converges to the wrong limit
    control = pipeline.run_converge(
        "gw",
        2.0,
        0.25 * kernels.admissible_bound("gw", 2.0, "lambda"),
        KAPPA,
        H_SEQ,
        1.0,
        coeff_name="lambda",
        scaling="naive",
        output_dir=str(OUT_ROOT / "cf_gw_2_naive"),
    )
    print(f"naive control, last max error {control.report.max_errors()[-1]:.3e} (expected > 1e-2)")
    rows.append(["gw-naive", 2.0, "control", control.report.max_errors().tolist()])
    return rows


def run_ks_checks():
    rows = []
    cases = [
        ("cg", 1.0, "exact-cauchy", 0.05, 100_000),
        ("cg", 0.5, "shifted-power", 1e-4, 100_000),
        ("cg", 1.0, "shifted-power", 0.02, 100_000),
        ("gl", 2.0, None, 0.1, 100_000),
    ]
    for model, alpha, variant, h, n_samples in cases:
        coeff = 0.5 if model == "gl" else None
        label = variant or model
        result = pipeline.run_sample(
            model,
            alpha,
            coeff,
            h,
            1.0,
            n_samples,
            seed=1,
            variant=variant,
            ks=True,
            binary=True,
            output_dir=str(OUT_ROOT / f"ks_{label}_{alpha:g}"),
        )
        print(f"KS {label} alpha={alpha} h={h:g}: D_N={result.ks:.4e} (1.36/sqrt(N)={1.36 / np.sqrt(n_samples):.4e})")
        rows.append([label, alpha, h, result.ks])
    return rows


def main():
    OUT_ROOT.mkdir(parents=True, exist_ok=True)
    summary = {"cf": run_cf_matrix(), "ks": run_ks_checks()}
    path = io_utils.save_json(summary, OUT_ROOT / "acceptance.json")
    print(f"Summary saved to {path}")


if __name__ == "__main__":
    main()
