"""Tests for the command-line interface."""

import json

import pytest

from elliptic_dedekind import __version__
from elliptic_dedekind.cli import build_parser, main
from elliptic_dedekind.errors import EXIT_BUDGET, EXIT_OK, EXIT_USAGE


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Run every command without profiles or .env files from the working tree."""
    monkeypatch.chdir(tmp_path)
    for name in ("DEFAULT_EPS", "DEDEKIND_BUDGET", "EISENSTEIN_PREC", "FIELDS_CONFIG"):
        monkeypatch.delenv(name, raising=False)


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


class TestParser:
    """Tests for argument parsing."""

    def test_version(self, capsys):
        """Test --version prints the package version."""
        with pytest.raises(SystemExit) as e:
            main(["--version"])
        assert e.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_missing_field(self):
        """Test --D is required."""
        with pytest.raises(SystemExit) as e:
            main(["field", "info"])
        assert e.value.code == 2

    def test_density_eps_is_separate(self):
        """Test the witness tolerance does not clash with the global eps."""
        argv = ["--eps", "0.95", "density", "witness", "--D", "2", "--x", "0,1", "--z", "1,1"]
        args = build_parser().parse_args([*argv, "--eps", "0.1"])
        assert args.eps == 0.95
        assert args.target_eps == 0.1


class TestCommands:
    """Tests for individual commands."""

    def test_field_info(self, capsys):
        """Test field info output."""
        code, data = run_json(capsys, ["field", "info", "--D", "7"])
        assert code == EXIT_OK
        assert data["d_K"] == -7
        assert data["B"] == ["1", "2"]
        assert data["eps"] == 0.9
        assert data["covering_threshold"] < data["eps"]

    def test_invalid_field(self, capsys):
        """Test a non-squarefree D exits with a usage error."""
        code, _ = run_json(capsys, ["field", "info", "--D", "4"])
        assert code == EXIT_USAGE

    def test_cf_expand(self, capsys):
        """Test an expansion in JSON."""
        argv = ["cf", "expand", "--D", "2", "--z", "0.3,0.7", "--depth", "6"]
        code, data = run_json(capsys, argv)
        assert code == EXIT_OK
        assert len(data["steps"]) == 6
        assert all(step["det_check"] for step in data["steps"])

    def test_cf_expand_point_of_k(self, capsys):
        """Test a point of K terminates the expansion."""
        code, data = run_json(capsys, ["cf", "expand", "--D", "2", "--z", "0.5,0", "--display"])
        assert code == EXIT_OK
        assert data["terminated"] is True
        assert data["steps"][-1]["p"] == "1"
        assert data["steps"][-1]["q"] == "2"

    def test_bad_point(self, capsys):
        """Test a malformed point exits with a usage error."""
        code, _ = run_json(capsys, ["cf", "expand", "--D", "2", "--z", "0.3"])
        assert code == EXIT_USAGE

    def test_brackets_verify(self, capsys):
        """Test the bracket identities command."""
        code, data = run_json(
            capsys, ["brackets", "verify", "--D", "7", "--depth", "5", "--trials", "5"]
        )
        assert code == EXIT_OK
        assert data["passed"] is True

    def test_eisen_e2(self, capsys):
        """Test E_2(0) vanishes for D = 3."""
        code, data = run_json(capsys, ["eisen", "e2", "--D", "3"])
        assert code == EXIT_OK
        assert abs(data["value"][0]) < 1e-9
        assert data["kind"] == "E2(0)"

    def test_eisen_e1(self, capsys):
        """Test E_1 output carries the point."""
        code, data = run_json(capsys, ["eisen", "e1", "--D", "2", "--z", "0.3,0.2"])
        assert code == EXIT_OK
        assert data["point"] == [0.3, 0.2]

    def test_dedekind_eval_zero(self, capsys):
        """Test D(0, 3) = 0."""
        code, data = run_json(capsys, ["dedekind", "eval", "--D", "2", "--a", "0", "--c", "3"])
        assert code == EXIT_OK
        assert data["value"] == [0.0, 0.0]
        assert data["ncosets"] == 9

    def test_dedekind_normalized_undefined(self, capsys):
        """Test --normalized fails for D = 1."""
        code, _ = run_json(
            capsys, ["dedekind", "eval", "--D", "1", "--a", "1", "--c", "2+1*w", "--normalized"]
        )
        assert code == EXIT_USAGE

    def test_dedekind_budget(self, capsys):
        """Test N(c) above the budget exits with the budget code."""
        code, _ = run_json(
            capsys, ["--budget", "10", "dedekind", "eval", "--D", "2", "--a", "1", "--c", "7"]
        )
        assert code == EXIT_BUDGET

    def test_phi_check(self, capsys):
        """Test the homomorphism check passes."""
        code, data = run_json(capsys, ["phi", "check", "--D", "2", "--trials", "5"])
        assert code == EXIT_OK
        assert data["passed"] is True

    def test_density_witness(self, capsys):
        """Test a direct-mode witness in JSON."""
        code, data = run_json(
            capsys,
            [
                "density", "witness", "--D", "2", "--x", "0.3,0.7", "--z=-0.2,0.45",
                "--eps", "0.25", "--u-mode", "direct",
            ],
        )
        assert code == EXIT_OK
        assert data["det_ok"] is True
        assert abs(data["predicted"] - data["target"]) <= data["bound"]

    def test_density_sample(self, tmp_path):
        """Test graph samples are written as CSV."""
        out = tmp_path / "graph.csv"
        code = main(
            ["density", "sample", "--D", "2", "--count", "5", "--max-norm", "20", "--out", str(out)]
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "re_alpha,im_alpha,d_tilde"
        assert len(lines) == 6

    def test_text_output(self, capsys):
        """Test the key: value format."""
        assert main(["--output", "text", "eisen", "e2", "--D", "2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "kind: E2(0)" in out

    def test_csv_output(self, capsys):
        """Test the one-row CSV format."""
        assert main(["--output", "csv", "eisen", "e2", "--D", "2"]) == EXIT_OK
        header, row = capsys.readouterr().out.splitlines()
        assert header.split(",")[0] == "D"
        assert row.startswith("2,")

    def test_options_after_subcommand(self, capsys):
        """Test run options are also accepted after the subcommand."""
        argv = ["dedekind", "eval", "--D", "2", "--a", "1", "--c", "7", "--budget", "10"]
        code, _ = run_json(capsys, argv)
        assert code == EXIT_BUDGET


class TestVerifyAll:
    """Tests for the one-shot invariant run."""

    @pytest.mark.parametrize("D", ["2", "5"])
    def test_all_suites_pass(self, capsys, D):
        """Test verify-all exits 0 with every suite green."""
        code, data = run_json(capsys, ["verify-all", "--D", D, "--seed", "7"])
        assert code == EXIT_OK
        assert data["passed"] is True
        assert data["seed"] == 7
        names = [suite["name"] for suite in data["suites"]]
        assert names == ["cfmartin", "brackets", "eisenstein", "dedekind", "phi", "density"]
        for suite in data["suites"]:
            assert suite["failures"] == []
            assert suite["checks"] > 0
