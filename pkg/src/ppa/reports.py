"""Machine-readable evaluation reports: schema, JSON/CSV writers, statistics.

All output is byte-deterministic for a fixed input: JSON is dumped with
sorted keys, CSV floats use repr (shortest round-trip form), and nothing
records wall-clock time.
"""

import csv
import hashlib
import importlib.resources
import json

import jsonschema
import numpy as np

SCHEMA_VERSION = 1


def report_schema():
    ref = importlib.resources.files("ppa") / "schemas" / "report.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_report(payload):
    jsonschema.validate(payload, report_schema())


def canonical_json(payload):
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def dump_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(payload))


def load_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def config_hash(payload):
    """Stable hash of a JSON-serializable configuration."""
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def summarize_errors_deg(errors_deg, ill_count=0):
    """Summary statistics of angular errors in degrees."""
    e = np.asarray(errors_deg, dtype=float)
    if e.size == 0:
        return {"count": 0, "ill_conditioned": int(ill_count)}
    return {
        "count": int(e.size),
        "ill_conditioned": int(ill_count),
        "mean_deg": float(np.mean(e)),
        "rmse_deg": float(np.sqrt(np.mean(e * e))),
        "median_deg": float(np.median(e)),
        "max_deg": float(np.max(e)),
        "frac_below_25deg": float(np.mean(np.abs(e) < 25.0)),
    }


def bin_stats(x, err_deg, lo, hi, width):
    """Per-bin count / mean / RMSE rows for a signed-error distribution.

    Values outside [lo, hi] are clipped into the boundary bins.  Returns
    rows (bin_lo, bin_hi, count, mean_deg, rmse_deg).
    """
    x = np.asarray(x, dtype=float)
    e = np.asarray(err_deg, dtype=float)
    nbins = int(round((hi - lo) / width))
    idx = np.clip(((x - lo) / width).astype(int), 0, nbins - 1)
    rows = []
    for b in range(nbins):
        sel = idx == b
        cnt = int(np.count_nonzero(sel))
        if cnt:
            mean = float(np.mean(e[sel]))
            rmse = float(np.sqrt(np.mean(e[sel] ** 2)))
        else:
            mean = rmse = 0.0
        rows.append((lo + b * width, lo + (b + 1) * width, cnt, mean, rmse))
    return rows


class BinAccumulator:
    """Streaming per-bin count/sum/sumsq so views can be processed one at a time."""

    def __init__(self, lo, hi, width):
        self.lo, self.hi, self.width = lo, hi, width
        self.nbins = int(round((hi - lo) / width))
        self.count = np.zeros(self.nbins, dtype=np.int64)
        self.total = np.zeros(self.nbins)
        self.total_sq = np.zeros(self.nbins)

    def add(self, x, err_deg):
        x = np.asarray(x, dtype=float)
        e = np.asarray(err_deg, dtype=float)
        idx = np.clip(((x - self.lo) / self.width).astype(int), 0, self.nbins - 1)
        self.count += np.bincount(idx, minlength=self.nbins)
        self.total += np.bincount(idx, weights=e, minlength=self.nbins)
        self.total_sq += np.bincount(idx, weights=e * e, minlength=self.nbins)

    def rows(self):
        out = []
        for b in range(self.nbins):
            cnt = int(self.count[b])
            mean = self.total[b] / cnt if cnt else 0.0
            rmse = float(np.sqrt(self.total_sq[b] / cnt)) if cnt else 0.0
            out.append((self.lo + b * self.width, self.lo + (b + 1) * self.width,
                        cnt, float(mean), rmse))
        return out


def merge_reports(payloads):
    """Union of several reports under one combined envelope.

    Checks are namespaced by kind; the merged report passes only when
    every embedded boolean check is true (nulls are skipped checks).
    """
    checks = {}
    sources = set()
    seeds = set()
    for p in payloads:
        kind = p.get("kind", "report")
        for name, value in p.get("checks", {}).items():
            checks[f"{kind}.{name}"] = value
        prov = p.get("provenance", {})
        sources.add(prov.get("source", "synthetic"))
        seeds.add(prov.get("seed"))
    all_pass = all(v for v in checks.values() if v is not None) if checks else True
    merged = {
        "schema_version": SCHEMA_VERSION,
        "kind": "combined",
        "provenance": {
            "source": "real" if sources == {"real"} else "synthetic",
            "seed": sorted(s for s in seeds if s is not None)[0] if any(
                s is not None for s in seeds) else None,
            "notes": ["combined report; see embedded reports for per-run provenance"],
        },
        "summary": {
            "reports": len(payloads),
            "checks_total": len(checks),
            "checks_passed": sum(1 for v in checks.values() if v is True),
            "checks_skipped": sum(1 for v in checks.values() if v is None),
            "all_pass": all_pass,
        },
        "checks": checks,
        "reports": list(payloads),
    }
    return merged, all_pass
