"""Rebuild the files bundled in src/gaitlab/data from the generators.

    python3 scripts/regenerate_data.py

Writes the summary-table fixtures (recording, analytic truth, pipeline
summary), the symmetric fixture and the reference gait.
"""

from pathlib import Path

from gaitlab import fixtures, report
from gaitlab.metrics import condition_summary
from gaitlab.recording import write_reference
from gaitlab.sim.reference import default_reference

DATA = Path(__file__).resolve().parents[1] / "src" / "gaitlab" / "data"


def main() -> None:
    for row, stem in fixtures.TABLE1_FILES.items():
        fx = fixtures.table1_fixture(row)
        fx.write(DATA / stem)
        summary = condition_summary(fx.recording)
        path = DATA / f"{stem}.summary.json"
        path.write_text(report.summary_json(summary), encoding="utf-8")
        print(path)
    fixtures.symmetric_fixture().write(DATA / "fixture_symmetric")
    write_reference(default_reference(), DATA / "reference_walk.csv")


if __name__ == "__main__":
    main()
