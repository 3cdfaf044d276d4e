"""Synthetic run-log builders shared by metric and acceptance tests."""

from __future__ import annotations

import json

from foodcourt.engine import Event


def header_line(mode="single", horizon=15, rids=("r1", "r2")) -> str:
    header = {
        "schema": 1, "config_hash": "x" * 64, "template_version": "default-v1",
        "mode": mode, "seed": 0, "gateway_mode": "scripted", "backend": "test",
        "horizon": horizon, "roster_persons": 50,
        "unit_count": 50 if mode == "single" else 25,
        "restaurants": {rid: rid.upper() for rid in rids},
        "initial_funds": {rid: "50000.00" for rid in rids},
        "wta_threshold": 0.8, "wta_from_day": 6,
    }
    return json.dumps({"type": "Header", "data": header}, sort_keys=True,
                      separators=(",", ":"))


def make_flow_log(flows, mode="single", horizon=15) -> list[str]:
    """Log skeleton with one DaySettled pair per day and a Terminated event."""
    lines = [header_line(mode=mode, horizon=horizon)]
    seq = 0
    for day, (f1, f2) in enumerate(flows, start=1):
        for rid, flow in (("r1", f1), ("r2", f2)):
            seq += 1
            lines.append(Event(day=day, phase=5, seq=seq, type="DaySettled",
                               data={"restaurant": rid, "income": "0.00",
                                     "expense": "0.00", "num_of_customer": flow,
                                     "dishes_sold": [],
                                     "funds_close": "50000.00",
                                     "insolvent": False}).to_line())
    seq += 1
    lines.append(Event(day=len(flows), phase=5, seq=seq, type="Terminated",
                       data={"cause": "horizon",
                             "days_completed": len(flows)}).to_line())
    return lines


def menu_frozen(day, seq, rid, names, scores=None) -> str:
    scores = scores if scores is not None else [0.5] * len(names)
    return Event(day=day, phase=2, seq=seq, type="MenuFrozen", data={
        "restaurant": rid,
        "menu": [{"name": n, "price": "10.00", "cost_price": "4.00",
                  "description": ""} for n in names],
        "dish_scores": [[n, s] for n, s in zip(names, scores)],
    }).to_line()
