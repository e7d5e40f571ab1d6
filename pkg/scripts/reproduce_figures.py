"""Run the three figure experiments from configs/ and print their summaries.

    python3 scripts/reproduce_figures.py --trials 20 --out results/
    python3 scripts/reproduce_figures.py --plot      # needs matplotlib
"""
import argparse
import dataclasses
from pathlib import Path

from irsfp.experiments import load_config, run_experiment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
FIGURES = {
    "convergence": "fig3_convergence.yaml",
    "snr": "fig4_snr_sweep.yaml",
    "irs": "fig5_irs_sweep.yaml",
}


def print_summary(name, summary):
    print(f"\n== {name}")
    last = {}
    for row in summary:
        last[(row["scheme"], row["sweep_value"])] = row
    for (scheme, value), row in last.items():
        if name == "convergence" and value % 10:
            continue
        print(f"{scheme:>11} {value:>6g}  mean={row['mean_sum_rate']:.3f}  "
              f"sem={row['sem_sum_rate']:.3f}  n={row['n']}")


def plot(results, out_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = {"convergence": ("iteration", "f1 (bits)"), "snr": ("SNR (dB)", "sum rate (bits)"),
              "irs": ("number of IRSs", "sum rate (bits)")}
    for name, summary in results.items():
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for scheme in sorted({r["scheme"] for r in summary}):
            rows = [r for r in summary if r["scheme"] == scheme]
            key = "mean_f1" if name == "convergence" else "mean_sum_rate"
            ax.plot([r["sweep_value"] for r in rows], [r[key] for r in rows], marker="o", ms=3, label=scheme)
        ax.set_xlabel(labels[name][0])
        ax.set_ylabel(labels[name][1])
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / f"{name}.png", dpi=150)
        plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, help="override the 100 trials of each config")
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--only", choices=sorted(FIGURES), action="append")
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    results = {}
    for name in args.only or FIGURES:
        config = load_config(CONFIGS / FIGURES[name])
        changes = {"output": str(args.out / f"{name}.csv"), "workers": args.workers}
        if args.trials:
            changes["trials"] = args.trials
        config = dataclasses.replace(config, **changes)
        results[name] = run_experiment(config)["summary"]
        print_summary(name, results[name])
    if args.plot:
        plot(results, args.out)


if __name__ == "__main__":
    main()
