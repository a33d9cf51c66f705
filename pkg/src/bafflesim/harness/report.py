"""Report persistence: a JSON summary plus a per-round CSV table."""
import csv
import hashlib
import io
import json
import os

from ..baffle import Decision
from ..exceptions import BaffleError
from .experiment import Report, RoundRecord, RunResult

ROUND_COLUMNS = ("repetition", "round", "poisoned", "decision", "reject_votes",
                 "main_acc", "backdoor_acc")


class ReportIOError(BaffleError, OSError):
    pass


def _record_to_dict(r):
    return {
        "round": r.round,
        "poisoned": r.was_poisoned,
        "decision": r.decision.value,
        "client_votes": {str(k): v for k, v in sorted(r.client_votes.items())},
        "server_vote": r.server_vote,
        "reject_votes": r.reject_votes,
        "main_acc": r.main_accuracy,
        "backdoor_acc": r.backdoor_accuracy,
    }


def _record_from_dict(d, repetition):
    return RoundRecord(
        round=int(d["round"]),
        was_poisoned=bool(d["poisoned"]),
        decision=Decision(d["decision"]),
        client_votes={int(k): int(v) for k, v in d["client_votes"].items()},
        server_vote=d["server_vote"],
        main_accuracy=float(d["main_acc"]),
        backdoor_accuracy=float(d["backdoor_acc"]),
        repetition=repetition,
    )


def report_to_dict(report):
    return {
        "config_hash": report.config_hash,
        "config": report.config,
        "fp_rate": report.fp_rate,
        "fn_rate": report.fn_rate,
        "runs": [
            {
                "repetition": run.repetition,
                "seed": run.seed,
                "warmup_rounds": run.warmup_rounds,
                "attacker_id": run.attacker_id,
                "source_class": run.source_class,
                "target_class": run.target_class,
                "adaptive_failures": run.adaptive_failures,
                "fp_rate": run.fp_rate(),
                "fn_rate": run.fn_rate(),
                "rounds": [_record_to_dict(r) for r in run.records],
            }
            for run in report.runs
        ],
    }


def report_from_dict(data):
    runs = []
    for run in data["runs"]:
        rep = int(run["repetition"])
        runs.append(RunResult(
            repetition=rep,
            seed=int(run["seed"]),
            records=[_record_from_dict(r, rep) for r in run["rounds"]],
            warmup_rounds=int(run["warmup_rounds"]),
            attacker_id=int(run["attacker_id"]),
            source_class=run["source_class"],
            target_class=int(run["target_class"]),
            adaptive_failures=int(run["adaptive_failures"]),
        ))
    return Report(data["config"], data["config_hash"], runs)


def dumps_summary(report):
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def round_rows(report):
    for run in report.runs:
        for r in run.records:
            yield {
                "repetition": run.repetition,
                "round": r.round,
                "poisoned": int(r.was_poisoned),
                "decision": r.decision.value,
                "reject_votes": r.reject_votes,
                "main_acc": repr(float(r.main_accuracy)),
                "backdoor_acc": repr(float(r.backdoor_accuracy)),
            }


def dumps_rounds(report):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=ROUND_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(round_rows(report))
    return buf.getvalue()


def parse_rounds(text):
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append({
            "repetition": int(row["repetition"]),
            "round": int(row["round"]),
            "poisoned": bool(int(row["poisoned"])),
            "decision": Decision(row["decision"]),
            "reject_votes": int(row["reject_votes"]),
            "main_acc": float(row["main_acc"]),
            "backdoor_acc": float(row["backdoor_acc"]),
        })
    return rows


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc


def _read(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc}") from exc


def emit_report(report, out_dir):
    """Write ``summary-<hash>.json`` and ``rounds-<hash>.csv``; return both paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create output directory {out_dir}: {exc}") from exc
    summary = os.path.join(out_dir, f"summary-{report.config_hash}.json")
    rounds = os.path.join(out_dir, f"rounds-{report.config_hash}.csv")
    _write(summary, dumps_summary(report))
    _write(rounds, dumps_rounds(report))
    return summary, rounds


def load_summary(path):
    try:
        return report_from_dict(json.loads(_read(path)))
    except (KeyError, ValueError) as exc:
        raise ReportIOError(f"malformed summary {path}: {exc}") from exc


def load_rounds(path):
    return parse_rounds(_read(path))


def sweep_rows(results):
    return [
        {"point": point, "config_hash": rep.config_hash,
         "fp_rate": rep.fp_rate, "fn_rate": rep.fn_rate}
        for point, rep in results
    ]


def emit_sweep(results, base_config, param_grid, out_dir):
    """Per-point files plus ``sweep-<hash>.json`` holding one row per grid point."""
    paths = [emit_report(rep, out_dir) for _, rep in results]
    key = json.dumps({"base": base_config.to_dict(), "grid": param_grid}, sort_keys=True)
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()[:12]
    doc = {"base_config": base_config.to_dict(), "grid": param_grid, "rows": sweep_rows(results)}
    path = os.path.join(out_dir, f"sweep-{digest}.json")
    _write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path, paths


def _fmt_rate(rate):
    if rate is None:
        return "n/a"
    return f"{rate['mean']:.3f} +/- {rate['std']:.3f}"


def format_table(rows, fmt="text"):
    """Render ``[{"label", "fp_rate", "fn_rate"}]`` as text or markdown."""
    header = ("config", "FP rate", "FN rate")
    body = [(r["label"], _fmt_rate(r["fp_rate"]), _fmt_rate(r["fn_rate"])) for r in rows]
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(b) + " |" for b in body]
        return "\n".join(lines) + "\n"
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(b, widths)) for b in body]
    return "\n".join(lines) + "\n"
