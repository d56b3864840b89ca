"""Figure rendering for experiment reports (PNG next to the CSV output).

Pure presentation layer: reads finished :class:`ExperimentReport` objects,
writes ``fig_*.png`` into the report directory, touches nothing else.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import ExperimentReport

_FIGSIZE = (6.4, 4.0)


def _new_axes(xlabel: str, ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render(report: ExperimentReport, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiment = report.header["experiment"]
    if experiment in ("fig7a", "fig7b"):
        return _render_fig7(report, out_dir)
    if experiment == "fig8":
        return _render_fig8(report, out_dir)
    if experiment == "appendixA":
        return _render_appendix_a(report, out_dir)
    if experiment == "mnist":
        return _render_mnist(report, out_dir)
    return []


def _render_fig7(report: ExperimentReport, out_dir: Path) -> list[Path]:
    m_values = sorted({row["m"] for row in report.rows})
    written = []

    fig, ax = _new_axes("exact inner product", "success probability",
                        "Rounded-readout success probability")
    for m in m_values:
        sub = [r for r in report.rows if r["m"] == m]
        ax.scatter([r["ip_exact"] for r in sub], [r["p_success"] for r in sub],
                   s=4, alpha=0.5, label=f"m={m}")
    ax.axhline(0.405285, color="k", linestyle="--", linewidth=0.8, label=r"$4/\pi^2$")
    ax.legend(markerscale=3)
    written.append(_save(fig, out_dir / "fig_success.png"))

    fig, ax = _new_axes("exact inner product", "decode error",
                        "Decode error shrinks with the register size")
    for m in m_values:
        sub = [r for r in report.rows if r["m"] == m]
        ax.scatter([r["ip_exact"] for r in sub], [r["epsilon"] for r in sub],
                   s=4, alpha=0.5, label=f"m={m}")
    ax.set_yscale("symlog", linthresh=1e-8)
    ax.legend(markerscale=3)
    written.append(_save(fig, out_dir / "fig_accuracy.png"))
    return written


def _render_fig8(report: ExperimentReport, out_dir: Path) -> list[Path]:
    q_values = sorted({row["q"] for row in report.rows})
    fig, ax = _new_axes("rounding offset", "success probability",
                        "Majority vote over repeated runs")
    for q in q_values:
        sub = [r for r in report.rows if r["q"] == q]
        ax.plot([r["delta_r"] for r in sub], [r["p_q"] for r in sub], label=f"q={q}")
    ax.legend()
    return [_save(fig, out_dir / "fig_majority.png")]


def _render_appendix_a(report: ExperimentReport, out_dir: Path) -> list[Path]:
    fig, ax = _new_axes("accuracy target (binary digits)", "log2(required shots)",
                        "Shot budget of naive repetition")
    gammas = sorted({row["gamma"] for row in report.rows})
    for pair in sorted({row["pair"] for row in report.rows}):
        sub = [r for r in report.rows if r["pair"] == pair]
        ax.plot([r["gamma"] for r in sub], [r["log2_shots"] for r in sub],
                "o-", alpha=0.6, label=f"pair {pair} (p1={sub[0]['p1']:.2f})")
    slope = report.summary["slope"]
    intercept = report.summary["intercept"]
    ax.plot(gammas, [slope * g + intercept for g in gammas], "k--",
            label=f"fit slope {slope:.2f}")
    ax.legend()
    return [_save(fig, out_dir / "fig_scaling.png")]


def _render_mnist(report: ExperimentReport, out_dir: Path) -> list[Path]:
    epochs = [r for r in report.rows if r["kind"] == "epoch"]
    fig, ax = _new_axes("epoch", "accuracy", "Binary classification accuracy")
    ax.plot([r["epoch"] for r in epochs], [r["train_acc"] for r in epochs], "o-",
            label="train")
    ax.plot([r["epoch"] for r in epochs], [r["test_acc"] for r in epochs], "s-",
            label="test")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    return [_save(fig, out_dir / "fig_accuracy.png")]
