"""Driving the command-line jobs from Python and reading their reports.

Run: python3 demos/07_reports_and_suite.py
The same jobs are available as ``kkcartan curvature ...``, ``kkcartan suite --all`` and so on.
"""

from kkcartan.cli import JobConfig, run_job
from kkcartan.report import ReportBundle

bundle = run_job(JobConfig(job="curvature", fixture="kasner:2/3,2/3,-1/3", points=["t=2"], format="csv"))
print(bundle.to_csv().splitlines()[0])
print(next(line for line in bundle.to_csv().splitlines() if line.startswith('"Riem^1_212')))
print("exit code would be", bundle.exit_code)

# Reports round-trip through JSON unchanged.
assert ReportBundle.from_json(bundle.to_json()) == bundle

# A job whose checks fail: arbitrary data violate the constraints.
bad = run_job(JobConfig(job="constraints", fixture="synthetic", grid=16))
for c in bad.checks:
    print(f"{c.name}: {c.value:.3f} (pass={c.passed})")
print("exit code would be", bad.exit_code)

# Two of the acceptance criteria.
suite = run_job(JobConfig(job="suite", criteria=[2, 11]))
for c in suite.checks:
    print(("PASS " if c.passed else "FAIL ") + c.name)
