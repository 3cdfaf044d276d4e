"""Competition metrics computed from a run log.

Everything here is a pure function of the parsed log: the same log file
yields byte-identical report files. Metrics: per-day menu similarity and its
mean, winner-take-all detection over customer flows, dish-score trends,
flow-share / reputation / comment-count series, and reason-category
distributions per decision unit.

Menu similarity is the Jaccard index over canonicalized dish-name sets; the
metric definition is recorded in the report metadata so similarity numbers
are not over-compared across differently-defined studies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .domain import canonical_name
from .engine import log_hash, parse_run_log
from .errors import DomainError
from .reasons import REASON_CATEGORIES, RULES_VERSION
from .util import round_half_up, sha256_hex

SIMILARITY_DEFINITION = "jaccard over canonicalized dish-name sets"

REPORT_FILES = (
    "similarity.csv",
    "flows.csv",
    "dish_scores.csv",
    "customer_scores.csv",
    "matthew.csv",
    "reasons.csv",
    "summary.json",
)


def menu_similarity(menu_a, menu_b) -> float:
    """Jaccard index of two menus' canonical name sets, in [0, 1]."""
    names_a = {canonical_name(n) for n in menu_a}
    names_b = {canonical_name(n) for n in menu_b}
    if not names_a or not names_b:
        raise DomainError("menu similarity undefined for an empty menu")
    union = names_a | names_b
    return len(names_a & names_b) / len(union)


@dataclass(frozen=True)
class WtaResult:
    evaluable: bool
    wta: bool
    winner: str | None


def detect_winner_take_all(flow_series, threshold: float = 0.8,
                           from_day: int = 6, horizon: int = 15,
                           names=("r1", "r2")) -> WtaResult:
    """True iff one fixed restaurant's daily share strictly exceeds the
    threshold on every day from `from_day` through `horizon`.

    `flow_series` is day-ordered (flow_a, flow_b) pairs starting at day 1.
    A series shorter than the horizon is not evaluable.
    """
    series = list(flow_series)
    if len(series) < horizon:
        return WtaResult(evaluable=False, wta=False, winner=None)
    for index, name in enumerate(names):
        won_all = True
        for day in range(from_day, horizon + 1):
            pair = series[day - 1]
            total = pair[0] + pair[1]
            if total <= 0 or pair[index] / total <= threshold:
                won_all = False
                break
        if won_all:
            return WtaResult(evaluable=True, wta=True, winner=name)
    return WtaResult(evaluable=True, wta=False, winner=None)


# --- extraction from events ------------------------------------------------------


def _rids(header: dict) -> list[str]:
    return sorted((header.get("restaurants") or {}).keys())


def frozen_menus_by_day(events) -> dict[int, dict[str, list[str]]]:
    out: dict[int, dict[str, list[str]]] = {}
    for e in events:
        if e.type == "MenuFrozen":
            out.setdefault(e.day, {})[e.data["restaurant"]] = [
                item["name"] for item in e.data["menu"]]
    return out


def dish_scores_by_day(events) -> dict[int, dict[str, list[float]]]:
    out: dict[int, dict[str, list[float]]] = {}
    for e in events:
        if e.type == "MenuFrozen":
            out.setdefault(e.day, {})[e.data["restaurant"]] = [
                s for _, s in e.data["dish_scores"]]
    return out


def flows_by_day(events) -> dict[int, dict[str, int]]:
    out: dict[int, dict[str, int]] = {}
    for e in events:
        if e.type == "DaySettled":
            out.setdefault(e.day, {})[e.data["restaurant"]] = \
                e.data["num_of_customer"]
    return out


def similarity_series(header: dict, events) -> tuple[dict[int, float], float | None]:
    """Per-day menu similarity (days where both menus were frozen) plus the
    mean over defined days."""
    menus = frozen_menus_by_day(events)
    rids = _rids(header)
    series: dict[int, float] = {}
    for day in sorted(menus):
        if len(rids) == 2 and all(r in menus[day] for r in rids):
            series[day] = menu_similarity(menus[day][rids[0]], menus[day][rids[1]])
    mean = sum(series.values()) / len(series) if series else None
    return series, mean


def dish_score_trend(header: dict, events) -> tuple[dict[str, dict[int, float]],
                                                    dict[str, float | None]]:
    """Daily mean dish score per restaurant and the day1-to-last delta."""
    scores = dish_scores_by_day(events)
    rids = _rids(header)
    series: dict[str, dict[int, float]] = {rid: {} for rid in rids}
    for day in sorted(scores):
        for rid, values in scores[day].items():
            if values and rid in series:
                series[rid][day] = sum(values) / len(values)
    deltas: dict[str, float | None] = {}
    for rid in rids:
        days = sorted(series[rid])
        deltas[rid] = (series[rid][days[-1]] - series[rid][days[0]]) if days else None
    return series, deltas


def matthew_series(header: dict, events) -> dict[int, dict[str, dict]]:
    """Per day and restaurant: flow share, running customer score (end of
    day), and comments received that day. The trio of reinforcement signals."""
    rids = _rids(header)
    flows = flows_by_day(events)
    comment_scores: dict[str, list[int]] = {rid: [] for rid in rids}
    daily_counts: dict[int, dict[str, int]] = {}
    running: dict[int, dict[str, float | None]] = {}
    for e in events:
        if e.type == "CommentPosted":
            rid = e.data["restaurant"]
            if rid in comment_scores:
                comment_scores[rid].append(e.data["score"])
                daily_counts.setdefault(e.day, {}).setdefault(rid, 0)
                daily_counts[e.day][rid] += 1
        elif e.type == "DaySettled":
            snapshot = {}
            for rid in rids:
                values = comment_scores[rid]
                snapshot[rid] = (round_half_up(sum(values) / len(values), 1)
                                 if values else None)
            running[e.day] = snapshot

    out: dict[int, dict[str, dict]] = {}
    for day in sorted(flows):
        total = sum(flows[day].values())
        out[day] = {}
        for rid in rids:
            flow = flows[day].get(rid, 0)
            out[day][rid] = {
                "flow": flow,
                "flow_share": (flow / total) if total else None,
                "customer_score": running.get(day, {}).get(rid),
                "comment_count": daily_counts.get(day, {}).get(rid, 0),
            }
    return out


def reason_distribution(events) -> tuple[dict[str, dict], dict[str, dict[str, float]]]:
    """Per-unit category counts normalized to percentages, plus mean rows for
    individuals and groups."""
    counts: dict[str, dict[str, int]] = {}
    kinds: dict[str, str] = {}
    for e in events:
        if e.type == "DecisionMade":
            unit = e.data["unit"]
            kinds[unit] = e.data.get("kind", "individual")
            counts.setdefault(unit, {c: 0 for c in REASON_CATEGORIES})
            counts[unit][e.data["category"]] += 1

    per_unit: dict[str, dict] = {}
    for unit in sorted(counts):
        total = sum(counts[unit].values())
        per_unit[unit] = {
            "kind": kinds[unit],
            "percent": {c: 100.0 * counts[unit][c] / total
                        for c in REASON_CATEGORIES},
        }

    averages: dict[str, dict[str, float]] = {}
    for kind in ("individual", "group"):
        rows = [u["percent"] for u in per_unit.values() if u["kind"] == kind]
        if rows:
            averages[kind] = {c: sum(r[c] for r in rows) / len(rows)
                              for c in REASON_CATEGORIES}
    return per_unit, averages


def termination(events) -> tuple[str | None, int]:
    for e in reversed(list(events)):
        if e.type == "Terminated":
            return e.data.get("cause"), int(e.data.get("days_completed", 0))
    return None, 0


# --- report emission ---------------------------------------------------------------


def _fmt(value, digits=6) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}f}"


@dataclass
class MetricReport:
    header: dict
    log_sha256: str
    similarity: dict[int, float]
    similarity_mean: float | None
    flows: dict[int, dict[str, int]]
    dish_scores: dict[str, dict[int, float]]
    dish_deltas: dict[str, float | None]
    matthew: dict[int, dict[str, dict]]
    reasons_per_unit: dict[str, dict]
    reasons_avg: dict[str, dict[str, float]]
    wta: WtaResult
    cause: str | None
    days_completed: int

    @property
    def rids(self) -> list[str]:
        return _rids(self.header)


def compute_report(source) -> MetricReport:
    """Compute every metric for one run log (path or lines)."""
    header, events = parse_run_log(source)
    sha = log_hash(source) if isinstance(source, (str, Path)) else sha256_hex(
        "\n".join(str(e) for e in events))
    similarity, mean = similarity_series(header, events)
    flows = flows_by_day(events)
    rids = _rids(header)
    series = [tuple(flows.get(day, {}).get(rid, 0) for rid in rids)
              for day in sorted(flows)]
    wta = detect_winner_take_all(
        series,
        threshold=float(header.get("wta_threshold", 0.8)),
        from_day=int(header.get("wta_from_day", 6)),
        horizon=int(header.get("horizon", 15)),
        names=tuple(rids) if len(rids) == 2 else ("r1", "r2"))
    scores, deltas = dish_score_trend(header, events)
    per_unit, averages = reason_distribution(events)
    cause, days = termination(events)
    return MetricReport(
        header=header, log_sha256=sha, similarity=similarity,
        similarity_mean=mean, flows=flows, dish_scores=scores,
        dish_deltas=deltas, matthew=matthew_series(header, events),
        reasons_per_unit=per_unit, reasons_avg=averages, wta=wta,
        cause=cause, days_completed=days)


def write_report(report: MetricReport, out_dir) -> list[Path]:
    """Emit the fixed report file set; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rids = report.rids
    written = []

    def emit(name: str, lines: list[str]) -> None:
        path = out / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        written.append(path)

    lines = ["day,similarity"]
    for day in sorted(report.similarity):
        lines.append(f"{day},{_fmt(report.similarity[day])}")
    emit("similarity.csv", lines)

    lines = ["day," + ",".join(rids)]
    for day in sorted(report.flows):
        row = [str(day)] + [str(report.flows[day].get(rid, 0)) for rid in rids]
        lines.append(",".join(row))
    emit("flows.csv", lines)

    lines = ["day," + ",".join(rids)]
    days = sorted({d for rid in rids for d in report.dish_scores.get(rid, {})})
    for day in days:
        row = [str(day)] + [_fmt(report.dish_scores.get(rid, {}).get(day))
                            for rid in rids]
        lines.append(",".join(row))
    emit("dish_scores.csv", lines)

    lines = ["day," + ",".join(rids)]
    for day in sorted(report.matthew):
        row = [str(day)]
        for rid in rids:
            score = report.matthew[day][rid]["customer_score"]
            row.append(_fmt(score, 1) if score is not None else "")
        lines.append(",".join(row))
    emit("customer_scores.csv", lines)

    lines = ["day,restaurant,flow,flow_share,customer_score,comment_count"]
    for day in sorted(report.matthew):
        for rid in rids:
            cell = report.matthew[day][rid]
            score = cell["customer_score"]
            lines.append(",".join([
                str(day), rid, str(cell["flow"]), _fmt(cell["flow_share"]),
                _fmt(score, 1) if score is not None else "",
                str(cell["comment_count"])]))
    emit("matthew.csv", lines)

    lines = ["unit,kind," + ",".join(REASON_CATEGORIES)]
    for unit, row in report.reasons_per_unit.items():
        cells = [unit, row["kind"]] + [
            f"{row['percent'][c]:.2f}" for c in REASON_CATEGORIES]
        lines.append(",".join(cells))
    for kind in ("individual", "group"):
        if kind in report.reasons_avg:
            cells = [f"ALL:{kind}", kind] + [
                f"{report.reasons_avg[kind][c]:.2f}" for c in REASON_CATEGORIES]
            lines.append(",".join(cells))
    emit("reasons.csv", lines)

    summary = {
        "provenance": {
            "log_sha256": report.log_sha256,
            "config_hash": report.header.get("config_hash"),
            "template_version": report.header.get("template_version"),
            "mode": report.header.get("mode"),
            "seed": report.header.get("seed"),
            "classifier_rules": RULES_VERSION,
        },
        "metric_notes": {
            "menu_similarity": SIMILARITY_DEFINITION,
            "customer_score": "running mean of all comment scores, one decimal",
        },
        "days_completed": report.days_completed,
        "termination_cause": report.cause,
        "similarity_mean": report.similarity_mean,
        "winner_take_all": {
            "evaluable": report.wta.evaluable,
            "verdict": report.wta.wta,
            "winner": report.wta.winner,
            "threshold": report.header.get("wta_threshold"),
            "from_day": report.header.get("wta_from_day"),
        },
        "dish_score_delta": report.dish_deltas,
    }
    path = Path(out) / "summary.json"
    path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8", newline="\n")
    written.append(path)
    return written


# --- multi-log aggregation ------------------------------------------------------------


def aggregate_reports(sources) -> dict:
    """Cross-run aggregation: winner-take-all frequency and mean dish-score
    deltas, grouped by roster mode."""
    modes: dict[str, dict] = {}
    for source in sources:
        report = compute_report(source)
        mode = report.header.get("mode", "unknown")
        bucket = modes.setdefault(mode, {
            "runs": 0, "wta_evaluable": 0, "wta_positive": 0, "deltas": {}})
        bucket["runs"] += 1
        if report.wta.evaluable:
            bucket["wta_evaluable"] += 1
            if report.wta.wta:
                bucket["wta_positive"] += 1
        for rid, delta in report.dish_deltas.items():
            if delta is not None:
                bucket["deltas"].setdefault(rid, []).append(delta)

    out: dict[str, dict] = {}
    for mode, bucket in sorted(modes.items()):
        evaluable = bucket["wta_evaluable"]
        frequency = (round_half_up(100.0 * bucket["wta_positive"] / evaluable, 1)
                     if evaluable else None)
        out[mode] = {
            "runs": bucket["runs"],
            "wta_evaluable": evaluable,
            "wta_positive": bucket["wta_positive"],
            "wta_frequency_pct": frequency,
            "mean_dish_score_delta": {
                rid: sum(vals) / len(vals)
                for rid, vals in sorted(bucket["deltas"].items())},
        }
    return out


def write_aggregate(result: dict, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["mode,runs,wta_evaluable,wta_positive,wta_frequency_pct"]
    for mode, row in sorted(result.items()):
        freq = "" if row["wta_frequency_pct"] is None else f"{row['wta_frequency_pct']:.1f}"
        lines.append(f"{mode},{row['runs']},{row['wta_evaluable']},"
                     f"{row['wta_positive']},{freq}")
    csv_path = out / "aggregate.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    json_path = out / "aggregate.json"
    json_path.write_text(json.dumps(result, sort_keys=True, indent=2) + "\n",
                         encoding="utf-8", newline="\n")
    return [csv_path, json_path]
