"""The self-check suite: clean pass, fault injection, report output."""

import csv

import pytest

from sediff.schedule import Schedule, Variant
from sediff.verify import verify_all, write_report


@pytest.fixture(scope="module")
def default_results():
    return verify_all()


class TestVerifyAll:
    def test_default_run_passes_everything(self, default_results):
        assert len(default_results) == 10
        failed = [r.name for r in default_results if not r.passed]
        assert failed == []

    def test_check_names_are_unique(self, default_results):
        names = [r.name for r in default_results]
        assert len(names) == len(set(names))

    def test_fault_injection_fails_only_the_coefficient_check(self):
        results = verify_all(perturb_g=1e-3)
        failed = [r.name for r in results if not r.passed]
        assert failed == ["diffusion-coefficient-fd"]

    def test_ve_reduction_included_on_request(self):
        results = verify_all(include_ve=True)
        names = [r.name for r in results]
        assert "ve-drift-reduction" in names
        assert all(r.passed for r in results)

    def test_spot_values_skipped_for_non_default_schedule(self):
        results = verify_all(Schedule(variant=Variant.VE_INTERP))
        names = [r.name for r in results]
        assert "diffusion-coefficient-spots" not in names
        assert all(r.passed for r in results)


class TestReport:
    def test_csv_round_trip(self, default_results, tmp_path):
        path = tmp_path / "report.csv"
        write_report(default_results, path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(default_results)
        assert set(rows[0]) == {"name", "status", "measured", "tolerance", "detail"}
        assert all(row["status"] == "pass" for row in rows)
