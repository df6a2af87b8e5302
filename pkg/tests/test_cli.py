import json

import numpy as np
import pytest

from hitlace import chains, cli, interlace
from hitlace.errors import EmptySubset

from conftest import STAR6_PI


@pytest.fixture
def star6_file(tmp_path, star6):
    path = tmp_path / "star6.json"
    doc = {"labels": list("012345"), "P": star6.tolist(), "target": "0"}
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def two_state_file(tmp_path):
    path = tmp_path / "two.json"
    doc = {"labels": ["x", "y"], "P": [[0.7, 0.3], [0.2, 0.8]], "target": "x"}
    path.write_text(json.dumps(doc))
    return str(path)


def run_cli(*argv):
    return cli.main(list(argv))


class TestExitCodes:
    def test_decompose_star6_passes(self, star6_file, tmp_path):
        out = tmp_path / "rep.json"
        assert run_cli("decompose", star6_file, "--target", "0",
                       "--out", str(out)) == 0
        rep = json.loads(out.read_text())
        assert rep["schema"] == "hitlace-report/1"
        np.testing.assert_allclose(rep["payload"]["lambdas"],
                                   [1, 0.8023, 0.7303, 0.1896], atol=1e-4)
        assert rep["payload"]["lambda_is_stochastic"]
        assert all(v["passed"] for v in rep["verdicts"])

    def test_moran_4(self, tmp_path, capsys):
        assert run_cli("moran", "4") == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["payload"]["mean"] == 9.0
        assert rep["payload"]["variance"] == 32.0

    def test_two_cycle_rejected_as_pipeline_error(self, tmp_path):
        path = tmp_path / "cycle2.json"
        path.write_text(json.dumps({"labels": ["a", "b"], "P": [[0, 1], [1, 0]]}))
        out = tmp_path / "rep.json"
        assert run_cli("brown-v", str(path), "--out", str(out)) == 3
        rep = json.loads(out.read_text())
        assert rep["error"]["kind"] == "MonotonicityViolated"

    def test_unparseable_input_exit_2(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("{not json")
        assert run_cli("decompose", str(path)) == 2

    def test_bad_row_sums_exit_2(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"P": [[0.5, 0.4], [0.5, 0.5]]}))
        assert run_cli("decompose", str(path)) == 2

    def test_validate_reports_violations_exit_1(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"P": [[0.5, 0.4], [0.5, 0.5]]}))
        out = tmp_path / "rep.json"
        assert run_cli("validate", str(path), "--out", str(out)) == 1
        rep = json.loads(out.read_text())
        assert rep["payload"]["violations"][0]["row"] == 0

    def test_validate_good_chain(self, two_state_file):
        assert run_cli("validate", two_state_file) == 0

    def test_block_verdict_failure_exit_1(self, star6_file, tmp_path):
        blocks = tmp_path / "blocks.json"
        # grouping leaves with unequal hold rates breaks proportionality
        blocks.write_text(json.dumps({"block_of": [0, 1, 1, 1, 2, 2]}))
        assert run_cli("block", star6_file, "--blocks", str(blocks),
                       "--out", str(tmp_path / "rep.json")) == 1

    def test_block_conforming_exit_0(self, star6_file, tmp_path):
        blocks = tmp_path / "blocks.json"
        blocks.write_text(json.dumps({"block_of": [0, 1, 1, 2, 3, 3]}))
        out = tmp_path / "rep.json"
        code = run_cli("block", star6_file, "--blocks", str(blocks),
                       "--out", str(out))
        rep = json.loads(out.read_text())
        assert code == 0, rep
        np.testing.assert_allclose(
            np.diag(rep["payload"]["P_hat"])[1:], [5 / 6, 7 / 9, 2 / 3], atol=1e-12)


class TestDeterminismAndCsv:
    def test_reports_byte_identical(self, star6_file, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("decompose", star6_file, "--target", "0", "--out", str(a))
        run_cli("decompose", star6_file, "--target", "0", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_link_sim_deterministic(self, star6_file, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("link-sim", star6_file, "--paths", "500", "--out", str(a))
        run_cli("link-sim", star6_file, "--paths", "500", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_csv_table(self, star6_file, tmp_path):
        csv = tmp_path / "cdf.csv"
        run_cli("decompose", star6_file, "--horizon", "50",
                "--out", str(tmp_path / "r.json"), "--csv", str(csv))
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "t,cdf_primary,cdf_dual,cdf_convolution"
        assert len(lines) == 52
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(6 / 21, abs=1e-12)


class TestLinkSim:
    def test_star6_statistics(self, star6_file, tmp_path):
        out = tmp_path / "rep.json"
        assert run_cli("link-sim", star6_file, "--paths", "3000",
                       "--out", str(out)) == 0
        rep = json.loads(out.read_text())
        p = rep["payload"]
        assert p["absorption_times_equal"] == 3000
        assert p["cell_pass_fraction"] >= 0.99
        assert p["chi_square_table"]


class TestCollapse:
    def test_singleton_is_relabel(self, star6):
        M = chains.validate_stochastic(star6, list("012345"))
        merged, _ = cli.collapse_states(M, None, ["0"], "0")
        np.testing.assert_allclose(merged.entries, M.entries, atol=1e-15)
        assert merged.labels == M.labels

    def test_rows_sum_to_one(self, star6):
        M = chains.validate_stochastic(star6, list("012345"))
        merged, _ = cli.collapse_states(M, STAR6_PI, ["1", "2"], "1")
        assert np.max(np.abs(merged.entries.sum(axis=1) - 1.0)) <= 1e-12

    def test_matches_leaf_collapse(self, star6):
        # merging the two rate-5/6 leaves reproduces the direct star
        # collapse on those coordinates
        M = chains.validate_stochastic(star6, list("012345"))
        merged, _ = cli.collapse_states(M, STAR6_PI, ["1", "2"], "1")
        collapsed = interlace.collapse_star(star6, STAR6_PI)
        # merged order: 0, merged(1,2), 3, 4, 5; collapsed spoke 1 is (1,2)
        assert merged.entries[1, 1] == pytest.approx(collapsed.P_star[1, 1],
                                                     abs=1e-12)
        assert merged.entries[0, 1] == pytest.approx(collapsed.P_star[0, 1],
                                                     abs=1e-12)
        assert merged.entries[1, 0] == pytest.approx(collapsed.P_star[1, 0],
                                                     abs=1e-12)

    def test_empty_subset(self, star6):
        M = chains.validate_stochastic(star6, list("012345"))
        with pytest.raises(EmptySubset):
            cli.collapse_states(M, None, [], "0")

    def test_cli_flag_round_trip(self, star6_file, tmp_path):
        # the listed states merge INTO the target: {0, 1, 2} become one
        out = tmp_path / "rep.json"
        code = run_cli("decompose", star6_file, "--target", "0",
                       "--collapse", "1,2", "--out", str(out))
        rep = json.loads(out.read_text())
        assert code == 0, rep
        assert rep["payload"]["state_order"] == ["0", "3", "4", "5"]


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "hitlace.cli", "moran", "3"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    rep = json.loads(out.stdout)
    assert rep["payload"]["mean"] == 4.0
