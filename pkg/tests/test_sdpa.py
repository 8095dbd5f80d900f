import numpy as np
import pytest

from diqkdsps.enums import ErrorCode
from diqkdsps.exceptions import DiqkdError
from diqkdsps.relaxation import build_problem
from diqkdsps.sdp import SemidefiniteProgram, solve_sdp, solve_with_cvxpy
from diqkdsps.sdpa import export_standard, read_sdpa, write_sdpa


@pytest.fixture
def program():
    ids = np.array([[-1, 0, 1], [0, -1, 2], [1, 2, -1]])
    const = np.diag([1.0, 0.5, 0.25])
    return SemidefiniteProgram(ids=ids, const=const, c=[1.0, -0.5, 2.0], offset=0.125)


class TestWriteRead:
    """Single-block .dat-s files."""

    def test_reads_back_same_program(self, program, tmp_path):
        """ids, constants, objective and offset survive the file."""
        path = write_sdpa(program, tmp_path / "p.dat-s", {"config_sha256": "abc"})
        instance = read_sdpa(path)
        assert np.array_equal(instance.program.ids, program.ids)
        assert np.allclose(instance.program.const, program.const)
        assert np.allclose(instance.program.c, program.c)
        assert instance.program.offset == program.offset
        assert instance.metadata["config_sha256"] == "abc"

    def test_header_layout(self, program, tmp_path):
        """SDPA counts, F_0 = -C0 and 1-based indices."""
        text = write_sdpa(program, tmp_path / "p.dat-s").read_text().splitlines()
        body = [line for line in text if not line.startswith("*")]
        assert body[0] == "3 = mDIM"
        assert body[1] == "1 = nBLOCK"
        assert body[2] == "3 = bLOCKsTRUCT"
        assert "0 1 1 1 -1" in body
        assert "1 1 1 2 1" in body

    def test_read_solution_unchanged(self, program, tmp_path):
        """The read-back program has the same optimum."""
        instance = read_sdpa(write_sdpa(program, tmp_path / "p.dat-s"))
        assert solve_sdp(instance.program).value == pytest.approx(solve_sdp(program).value, abs=1e-6)

    def test_malformed_file(self, tmp_path):
        """Text that is not SDPA is an IO error."""
        path = tmp_path / "bad.dat-s"
        path.write_text("not an sdpa file\n")
        with pytest.raises(DiqkdError) as exc_info:
            read_sdpa(path)
        assert exc_info.value.code == ErrorCode.IO_ERROR

    def test_missing_file(self, tmp_path):
        """A missing file is an IO error."""
        with pytest.raises(DiqkdError) as exc_info:
            read_sdpa(tmp_path / "missing.dat-s")
        assert exc_info.value.code == ErrorCode.IO_ERROR

    def test_non_indicator_rejected(self, tmp_path):
        """Variable matrices other than 0/1 indicators cannot be read."""
        path = tmp_path / "scaled.dat-s"
        path.write_text("1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n0 1 1 1 -1\n1 1 1 2 2.5\n")
        with pytest.raises(DiqkdError) as exc_info:
            read_sdpa(path)
        assert exc_info.value.code == ErrorCode.IO_ERROR


class TestExportStandard:
    """One file per quadrature node of a relaxation."""

    def test_files_and_metadata(self, tsirelson_behavior, tmp_path):
        """One file per inner node with the run metadata in comments."""
        problem = build_problem(tsirelson_behavior, m=3, level=1, extras=False)
        paths = export_standard(problem, tmp_path / "relax", {"grid_point": "0"})
        assert [p.name for p in paths] == ["relax_node1.dat-s", "relax_node2.dat-s"]
        instance = read_sdpa(paths[1])
        assert instance.metadata["m"] == "3"
        assert instance.metadata["node"] == "2"
        assert instance.metadata["grid_point"] == "0"
        assert float(instance.metadata["t"]) == pytest.approx(problem.rule.nodes[1])
        assert np.allclose(instance.program.c, problem.programs[1].c)

    def test_exported_instance_solves_alike(self, tsirelson_behavior, tmp_path):
        """cvxpy on the re-read files agrees with the embedded solver on the in-memory programs."""
        pytest.importorskip("cvxpy")
        problem = build_problem(tsirelson_behavior, m=3, level=1, extras=False)
        paths = export_standard(problem, tmp_path / "relax")
        for path, program in zip(paths, problem.programs):
            exported = read_sdpa(path).program
            assert solve_with_cvxpy(exported) == pytest.approx(solve_sdp(program).value, abs=1e-4)
