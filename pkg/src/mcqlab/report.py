"""Study reports: canonical JSON plus a text rendering.

The JSON file is the artifact of record: keys are sorted, all values are
plain Python types, and nothing time- or machine-dependent is included, so
a rerun with the same seed reproduces it byte for byte.  The text rendering
is a pure function of the JSON-canonicalized dict (the dict is round-tripped
through the JSON codec before rendering), which makes the .txt equally
reproducible.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

NOT_COMPUTED = "not computed"


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-string keys into
    plain JSON-serializable Python values (keys become strings)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def config_hash(config) -> str:
    """sha256 of the canonical (sorted, compact) JSON form of a config."""
    compact = json.dumps(jsonable(config), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(compact.encode("utf-8")).hexdigest()


def report_paths(out_dir, seed) -> tuple[Path, Path]:
    out = Path(out_dir)
    return out / f"report_seed{seed}.json", out / f"report_seed{seed}.txt"


def write_report(out_dir, report: dict) -> tuple[Path, Path]:
    """Write ``report_seed<N>.json`` and its text rendering; returns both
    paths.  ``report['provenance']['seed']`` names the files."""
    seed = report["provenance"]["seed"]
    json_path, txt_path = report_paths(out_dir, seed)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    blob = canonical_json(report)
    json_path.write_text(blob, encoding="utf-8")
    txt_path.write_text(render_text(json.loads(blob)), encoding="utf-8")
    return json_path, txt_path


# ---------------------------------------------------------------------------
# text rendering

def _fmt_prob(x) -> str:
    return f"{x:.4f}" if isinstance(x, (int, float)) else str(x)


def _fmt_p(x) -> str:
    if not isinstance(x, (int, float)):
        return str(x)
    return "<1e-12" if 0 < x < 1e-12 else f"{x:.3g}"


def _analysis_lines(title: str, block, level_label: str) -> list[str]:
    lines = [title, "-" * len(title)]
    if not isinstance(block, dict):
        lines.append(f"  {NOT_COMPUTED}")
        lines.append("")
        return lines

    counts = block.get("counts", {})
    naive = block.get("naive", {})
    model_prob = block.get("model_prob", NOT_COMPUTED)
    levels = sorted(counts, key=lambda s: (len(s), s))
    header = (f"  {level_label:<12} {'answers':>8} {'items':>7} "
              f"{'naive':>8} {'model':>8}")
    lines.append(header)
    for lv in levels:
        c = counts[lv]
        model_v = (model_prob.get(lv, NOT_COMPUTED)
                   if isinstance(model_prob, dict) else NOT_COMPUTED)
        lines.append(
            f"  {lv:<12} {c['n_answers']:>8} {c['n_items']:>7} "
            f"{_fmt_prob(naive.get(lv, NOT_COMPUTED)):>8} "
            f"{_fmt_prob(model_v):>8}"
        )

    model = block.get("model", NOT_COMPUTED)
    if isinstance(model, dict):
        lines.append(
            f"  model: sigma_u={model['sigma_u']:.4f}, "
            f"loglik={model['loglik']:.4f}, "
            f"converged={model['converged']}, n_iter={model['n_iter']}"
        )
    else:
        lines.append(f"  model: {NOT_COMPUTED}")

    tests = block.get("tests", NOT_COMPUTED)
    if isinstance(tests, dict):
        for name in sorted(tests):
            t = tests[name]
            lines.append(
                f"  test [{name}]: statistic={t['statistic']:.4f}, "
                f"df={t['df']}, p={_fmt_p(t['p_value'])}"
                + (" (boundary)" if t.get("boundary") else "")
            )
    else:
        lines.append(f"  tests: {NOT_COMPUTED}")

    spread = block.get("grade_scale_spread", NOT_COMPUTED)
    if isinstance(spread, (int, float)):
        lines.append(f"  grade-scale spread (10-point): {spread}")
    else:
        lines.append(f"  grade-scale spread: {NOT_COMPUTED}")
    lines.append("")
    return lines


def render_text(report: dict) -> str:
    prov = report.get("provenance", {})
    title = f"Synthetic MCQ study report (seed {prov.get('seed', '?')})"
    lines = [title, "=" * len(title), ""]
    lines.append(f"config sha256: {prov.get('config_hash', NOT_COMPUTED)}")
    lines.append(f"package version: {prov.get('version', NOT_COMPUTED)}")
    lines.append("")

    bank = report.get("bank", NOT_COMPUTED)
    if isinstance(bank, dict):
        lines.append(
            f"Bank: {bank['n_items']} items over "
            f"{len(bank.get('by_header', {}))} headers"
        )
        by_kind = bank.get("by_kind", {})
        if by_kind:
            parts = ", ".join(f"{k}={v}" for k, v in sorted(by_kind.items()))
            lines.append(f"  by kind: {parts}")
    else:
        lines.append(f"Bank: {NOT_COMPUTED}")

    cohort = report.get("cohort", NOT_COMPUTED)
    if isinstance(cohort, dict):
        lines.append(
            f"Cohort: {cohort['n_students']} students, "
            f"{cohort['n_students_retained']} retained after the "
            f"minimum-answers rule (>= {cohort['min_answers_exclusion']}); "
            f"{cohort['n_answers']} answers, "
            f"{cohort['n_answers_retained']} retained"
        )
        lines.append(f"  regime: {cohort.get('regime', NOT_COMPUTED)}")
    else:
        lines.append(f"Cohort: {NOT_COMPUTED}")
    lines.append("")

    lines += _analysis_lines(
        "Distractor-count analysis (plain items)",
        report.get("distractor_analysis", NOT_COMPUTED),
        "distractors",
    )
    lines += _analysis_lines(
        "Option-kind analysis (four-option items)",
        report.get("kind_analysis", NOT_COMPUTED),
        "kind",
    )

    guessing = report.get("guessing", NOT_COMPUTED)
    lines.append("Guessing fraction")
    lines.append("-----------------")
    if isinstance(guessing, dict):
        lines.append(
            f"  fraction={guessing['fraction']:.4f} "
            f"(unclamped {guessing['fraction_unclamped']:.4f}, "
            f"informed accuracy {guessing['p_informed']:.2f}, "
            f"source: {guessing.get('source', '?')})"
        )
        lines.append(
            "  levels: "
            + ", ".join(
                f"k={k}:{_fmt_prob(p)}"
                for k, p in zip(guessing["levels"], guessing["proportions"])
            )
        )
    else:
        lines.append(f"  {NOT_COMPUTED}")
    lines.append("")
    return "\n".join(lines)
