"""Optional matplotlib rendering of experiment results.

Imported lazily by the CLI when figures are requested; everything else in
the package stays matplotlib-free.  One PNG per run, written next to the
CSV/JSON outputs.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np


def _agg(records):
    by_size = defaultdict(lambda: {"n": 0, "ok": 0, "queries": 0})
    for r in records:
        row = by_size[(r.experiment, r.size)]
        row["n"] += 1
        row["ok"] += r.success
        row["queries"] += r.queries
    return by_size


def render_figures(kind: str, records, summary: dict, outdir) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{kind}.png"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))

    if kind in ("search", "scaling"):
        per = summary.get("per_size", {})
        ns = sorted(int(k) for k in per)
        N = [2**n for n in ns]
        q = [per[str(n)]["mean_queries"] for n in ns]
        ax.loglog(N, q, "o-", label="mean queries")
        ax.loglog(N, [x ** (1 / 3) for x in N], "--", color="gray", label="N^{1/3}")
        fit = summary.get("fit")
        if fit:
            xs = np.array(N, dtype=float)
            ax.loglog(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], ":",
                      label=f"fit slope {fit['slope']:.3f}")
        ax.set_xlabel("N")
        ax.set_ylabel("queries")
        ax.legend()
        ax.set_title("search query scaling")
    elif kind == "juggle":
        per = summary.get("per_size", {})
        ls = sorted(int(k) for k in per)
        rate = [max(per[str(l)]["failure_rate"], 1e-6) for l in ls]
        bound = [per[str(l)]["bound"] for l in ls]
        ax.semilogy(ls, rate, "o-", label="empirical failure")
        ax.semilogy(ls, bound, "--", label="bound")
        ax.set_xlabel("register size l")
        ax.set_ylabel("failure rate")
        ax.legend()
        ax.set_title("juggle failure vs. bound")
    elif kind == "marginals":
        ax.bar(["max TV"], [summary.get("max_tv", 0.0)])
        ax.axhline(0.02, color="red", linestyle="--", label="tolerance")
        ax.legend()
        ax.set_title("empirical vs. simulated marginals")
    elif kind == "axioms":
        by = _agg(records)
        labels = [f"l={size}" for (_, size) in sorted(by)]
        vals = [by[k]["ok"] / by[k]["n"] for k in sorted(by)]
        ax.bar(labels, vals)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("fraction passing")
        ax.set_title("axiom checks by register size")
    else:  # sd, collision, gi: accuracy bars per cell
        by = _agg(records)
        cells = sorted({exp for (exp, _) in by})
        accs = []
        for c in cells:
            n_tot = sum(v["n"] for (e, _), v in by.items() if e == c)
            n_ok = sum(v["ok"] for (e, _), v in by.items() if e == c)
            accs.append(n_ok / n_tot)
        ax.bar(cells, accs)
        ax.axhline(0.9, color="red", linestyle="--")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("accuracy")
        ax.set_title(f"{kind} verdict accuracy")
        ax.tick_params(axis="x", labelrotation=20)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
