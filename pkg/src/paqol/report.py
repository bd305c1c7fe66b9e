"""Markdown validation report mirroring the study's refutation-table layout:
one row per method with (estimated effect, new estimated effect, p-value),
a quality-of-life band interpretation line, and the run manifest digest.
"""

from __future__ import annotations

from typing import Mapping

from .data import DataError, qol_band

_METHOD_LABELS = {
    "PlaceboTreatment": "Placebo treatment",
    "AddRandomCommonCause": "Add random cause",
    "DataSubset": "Data subset",
    "UnobservedCommonCause": "Unobserved random cause",
}

# Table rows follow the paper's ordering, not enum order.
_METHOD_ORDER = (
    "PlaceboTreatment",
    "AddRandomCommonCause",
    "DataSubset",
    "UnobservedCommonCause",
)


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _display_new_effect(entry: Mapping) -> float:
    new = entry["new_effect"]
    if isinstance(new, (int, float)):
        return float(new)
    # Per-strength list: show the re-estimate that moved furthest.
    original = float(entry["original_effect"])
    return float(max(new, key=lambda e: abs(e - original)))


def render_report(
    estimate: Mapping,
    refutation: Mapping,
    config_digest: str,
) -> str:
    """Render the per-timepoint validation report as markdown."""
    lines: list[str] = []
    timepoint = estimate.get("timepoint", "unknown timepoint")
    lines.append(f"# Validation report: {timepoint}")
    lines.append("")
    lines.append(
        f"Outcome `{estimate['outcome']}`, treatment `{estimate['treatment']}`, "
        f"transition {estimate['transition'][0]:g} to {estimate['transition'][1]:g}."
    )
    lines.append("")
    lines.append(
        f"Effects: ATE {_fmt(estimate['ate'])}, NDE {_fmt(estimate['nde'])}, "
        f"NIE {_fmt(estimate['nie'])}, TE {_fmt(estimate['te'])}."
    )
    lines.append("")
    lines.append("| Method | Estimated effect | New estimated effect | p-value |")
    lines.append("| --- | --- | --- | --- |")
    by_method = {entry["method"]: entry for entry in refutation["results"]}
    for method in _METHOD_ORDER:
        entry = by_method.get(method)
        if entry is None:
            continue
        p = entry.get("p_value")
        p_text = "—" if p is None else _fmt(p)
        lines.append(
            f"| {_METHOD_LABELS[method]} | {_fmt(entry['original_effect'])} "
            f"| {_fmt(_display_new_effect(entry))} | {p_text} |"
        )
    for entry in refutation["results"]:
        if entry["method"] == "UnobservedCommonCause" and entry.get("strengths"):
            pairs = ", ".join(
                f"(kappa_t={kt:g}, kappa_y={ky:g}) -> {_fmt(e)}"
                for (kt, ky), e in zip(entry["strengths"], entry["new_effect"])
            )
            lines.append("")
            lines.append(f"Unobserved-cause re-estimates by strength: {pairs}.")
    lines.append("")
    lines.append(f"Aggregate verdict: {refutation['aggregate_verdict']}")
    band_line = _band_line(estimate)
    if band_line:
        lines.append("")
        lines.append(band_line)
    lines.append("")
    lines.append(f"Run manifest digest: {config_digest}")
    lines.append("")
    return "\n".join(lines)


def _band_line(estimate: Mapping) -> str | None:
    baseline = estimate.get("control_mean")
    if baseline is None:
        return None
    shifted = float(baseline) + float(estimate["te"])
    try:
        before = qol_band(float(baseline)).label
        after = qol_band(shifted).label
    except DataError:
        return None
    return (
        f"QoL interpretation: control mean {_fmt(float(baseline))} ({before}) shifts to "
        f"{_fmt(shifted)} ({after}), i.e. {before} → {after}."
    )
