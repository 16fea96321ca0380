"""Run the committed 20-item benchmark end to end and print the report.

Equivalent to `seller-insights eval --config fixtures/engine.json
--benchmark fixtures/benchmark.jsonl --out /tmp/report.json` but in-process,
so it is handy when hacking on the harness itself.
"""

from __future__ import annotations

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from seller_insights.evalharness import load_benchmark, render_report, run_benchmark  # noqa: E402
from seller_insights.service import build_engine, load_config  # noqa: E402


def main() -> int:
    fixtures = REPO / "fixtures"
    engine, ctx = build_engine(load_config(str(fixtures / "engine.json")))
    items = load_benchmark(str(fixtures / "benchmark.jsonl"))
    report = run_benchmark(engine, items, ctx)
    print(render_report(report))
    return 0 if report.accuracy["fraction"] == 1.0 else 1


if __name__ == "__main__":
    sys.exit(main())
