"""Tests for the command-line interface."""

from __future__ import annotations

import json
import sys

import numpy as np
import pytest

from rbfcors.cli import (
    EXIT_CONFIG,
    EXIT_OBJECTIVE,
    EXIT_OK,
    format_float,
    load_run_config,
    main,
    parse_history,
)
from rbfcors.rbf import fit


def write_config(path, **overrides):
    config = {
        "objective": "valley",
        "n_init": 10,
        "n_iter": 5,
        "seed": 7,
    }
    config.update(overrides)
    path.write_text(json.dumps(config, indent=1))
    return path


class TestRunCommand:
    def test_successful_run_writes_history_and_summary(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "hist.csv"
        code = main(["run", "--config", str(cfg), "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "stage,index,x_1,x_2,f_raw,f_scaled,radius,fallback"
        assert len(lines) == 16  # header + 10 initial + 5 subsequent
        last = capsys.readouterr().out.strip().splitlines()[-1]
        assert last.startswith("best_x=") and "best_f=" in last

    def test_runs_are_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out_a)]) == EXIT_OK
        assert main(["run", "--config", str(cfg), "--out", str(out_b)]) == EXIT_OK
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg_a = write_config(tmp_path / "a.json", seed=1)
        cfg_b = write_config(tmp_path / "b.json", seed=2)
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["run", "--config", str(cfg_a), "--seed", "9", "--out", str(out_a)])
        main(["run", "--config", str(cfg_b), "--seed", "9", "--out", str(out_b)])
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_valley_converges_near_zero(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", n_init=20, n_iter=10, seed=3)
        out = tmp_path / "hist.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        summary = capsys.readouterr().out.strip().splitlines()[-1]
        best_f = float(summary.split("best_f=")[1])
        assert best_f <= 0.05

    def test_unknown_key_rejected_with_line_number(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json")
        doc = json.loads(cfg.read_text())
        doc["n_itr"] = 3  # typo
        cfg.write_text(json.dumps(doc, indent=1))
        line = next(
            i
            for i, text in enumerate(cfg.read_text().splitlines(), start=1)
            if "n_itr" in text
        )
        code = main(["run", "--config", str(cfg)])
        assert code == EXIT_CONFIG
        message = capsys.readouterr().err
        assert "n_itr" in message and f"line {line}" in message

    def test_too_small_design_rejected_naming_invariant(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", n_init=3)
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        message = capsys.readouterr().err
        assert "n_init" in message and "d + 2" in message.replace("dim", "d")

    def test_no_output_written_on_config_error(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", n_init=3)
        out = tmp_path / "hist.csv"
        main(["run", "--config", str(cfg), "--out", str(out)])
        assert not out.exists()

    def test_bounds_must_lie_within_builtin_box(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", lower=[0.0, 0.0], upper=[2.0, 1.0])
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        assert "within" in capsys.readouterr().err

    def test_narrowed_bounds_accepted(self, tmp_path):
        cfg = write_config(
            tmp_path / "cfg.json", lower=[0.25, 0.25], upper=[0.75, 0.75]
        )
        out = tmp_path / "hist.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        points, _, _ = parse_history(str(out))
        assert points.shape == (15, 2)

    def test_invalid_json_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"objective": "valley",}')
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        assert "JSON" in capsys.readouterr().err

    def test_unknown_objective_name_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", objective="rastrigin")
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        assert "rastrigin" in capsys.readouterr().err

    def test_proposal_settings_accepted_and_checked(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "cfg.json", proposal={"uniform_per_dim": 200}
        )
        out = tmp_path / "hist.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        cfg = write_config(tmp_path / "bad.json", proposal={"uniform": 200})
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        assert "uniform" in capsys.readouterr().err

    def test_loaded_config_carries_defaults(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        spec = load_run_config(str(cfg))
        assert spec.config.initial_density == 0.75
        assert spec.config.keep_fraction == 0.75
        assert spec.config.workers == 1
        assert spec.config.batch_size is None
        assert spec.history_out == "history.csv"


class TestExternalObjective:
    def make_script(self, tmp_path, body):
        script = tmp_path / "objective.py"
        script.write_text(body)
        return script

    def test_subprocess_objective_runs(self, tmp_path, capsys):
        script = self.make_script(
            tmp_path,
            "import sys\n"
            "for line in sys.stdin:\n"
            "    x, y = map(float, line.split())\n"
            "    print((x - 0.25) ** 2 + (y - 0.75) ** 2)\n"
            "    sys.stdout.flush()\n",
        )
        cfg = write_config(
            tmp_path / "cfg.json",
            objective=[sys.executable, str(script)],
            lower=[0.0, 0.0],
            upper=[1.0, 1.0],
            n_init=8,
            n_iter=6,
            workers=2,
        )
        out = tmp_path / "hist.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        summary = capsys.readouterr().out.strip().splitlines()[-1]
        best_x = [float(v) for v in summary.split("best_x=")[1].split()[0].split(",")]
        assert abs(best_x[0] - 0.25) < 0.2 and abs(best_x[1] - 0.75) < 0.2

    def test_external_objective_requires_bounds(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "cfg.json", objective=[sys.executable, "x.py"])
        assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
        assert "bounds" in capsys.readouterr().err

    def test_dying_objective_exits_three_with_partial_history(self, tmp_path, capsys):
        script = self.make_script(
            tmp_path,
            "import sys\n"
            "for i, line in enumerate(sys.stdin):\n"
            "    if i == 3:\n"
            "        sys.exit(1)\n"
            "    print(1.0)\n"
            "    sys.stdout.flush()\n",
        )
        cfg = write_config(
            tmp_path / "cfg.json",
            objective=[sys.executable, str(script)],
            lower=[0.0, 0.0],
            upper=[1.0, 1.0],
            n_init=6,
            n_iter=2,
            workers=1,
        )
        out = tmp_path / "hist.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OBJECTIVE
        assert out.exists()
        lines = out.read_text().splitlines()
        assert 1 < len(lines) < 9  # header plus the evaluations that finished

    def test_missing_command_exits_three(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "cfg.json",
            objective=["/nonexistent/objective-binary"],
            lower=[0.0, 0.0],
            upper=[1.0, 1.0],
        )
        assert main(["run", "--config", str(cfg)]) == EXIT_OBJECTIVE
        assert "cannot start" in capsys.readouterr().err


class TestLhsCommand:
    def test_design_file_shape_and_trailer(self, tmp_path):
        out = tmp_path / "design.csv"
        code = main(
            ["lhs", "--n", "20", "--d", "2", "--attempts", "1000", "--seed", "1",
             "--out", str(out)]
        )
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "x_1,x_2"
        assert len(lines) == 22  # header + 20 rows + trailer
        trailer = lines[-1]
        assert trailer.startswith("# spread=")
        initial, final = trailer.removeprefix("# spread=").split(" -> ")
        assert float(final) < float(initial)

    def test_zero_attempts_gives_diagonal(self, tmp_path):
        out = tmp_path / "design.csv"
        main(["lhs", "--n", "5", "--d", "3", "--attempts", "0", "--out", str(out)])
        rows = [line.split(",") for line in out.read_text().splitlines()[1:-1]]
        for row in rows:
            assert len(set(row)) == 1  # all coordinates equal on the diagonal

    def test_two_point_line(self, tmp_path):
        out = tmp_path / "design.csv"
        main(["lhs", "--n", "2", "--d", "1", "--out", str(out)])
        lines = out.read_text().splitlines()
        assert lines[1] == "0.0" and lines[2] == "1.0"

    def test_rejects_single_point(self, tmp_path, capsys):
        out = tmp_path / "design.csv"
        assert main(["lhs", "--n", "1", "--d", "2", "--out", str(out)]) == EXIT_CONFIG
        assert "n must be" in capsys.readouterr().err
        assert not out.exists()


class TestSurfaceCommand:
    def run_history(self, tmp_path, **overrides):
        cfg = write_config(tmp_path / "cfg.json", **overrides)
        out = tmp_path / "hist.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        return out

    def load_grid(self, path):
        lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        return np.array([[float(v) for v in line.split(",")] for line in lines])

    def test_consumes_run_output(self, tmp_path):
        history = self.run_history(tmp_path)
        out = tmp_path / "surface.csv"
        code = main(
            ["surface", "--history", str(history), "--resolution", "41",
             "--unscaled", "--out", str(out)]
        )
        assert code == EXIT_OK
        assert self.load_grid(out).shape == (41, 41)

    def test_grid_interpolates_sample_locations(self, tmp_path):
        history = self.run_history(tmp_path, n_init=20, n_iter=0, seed=5)
        out = tmp_path / "surface.csv"
        resolution = 101
        main(
            ["surface", "--history", str(history), "--resolution",
             str(resolution), "--unscaled", "--out", str(out)]
        )
        grid = self.load_grid(out)
        points, raw, _ = parse_history(str(history))
        model = fit(points, raw)
        axis = np.linspace(0.0, 1.0, resolution)
        for center, value in zip(points, raw):
            i, j = (int(np.argmin(np.abs(axis - c))) for c in center)
            node = np.array([axis[i], axis[j]])
            # Local linearity slack: the surface moves at most its local
            # slope times the node offset (finite-difference estimate).
            step = 1e-4
            grad = np.array(
                [
                    (model.evaluate(center + e * step) - model.evaluate(center - e * step))
                    / (2 * step)
                    for e in np.eye(2)
                ]
            )
            slack = 1e-4 + 2.0 * float(np.linalg.norm(grad)) * float(
                np.linalg.norm(node - center)
            )
            assert abs(grid[i, j] - value) <= slack

    def test_scaled_and_unscaled_grids_differ(self, tmp_path):
        history = self.run_history(tmp_path, n_init=20, n_iter=0, seed=6)
        out_u, out_s = tmp_path / "u.csv", tmp_path / "s.csv"
        main(["surface", "--history", str(history), "--resolution", "31",
              "--unscaled", "--out", str(out_u)])
        main(["surface", "--history", str(history), "--resolution", "31",
              "--scaled", "--seed", "0", "--out", str(out_s)])
        assert not np.array_equal(self.load_grid(out_u), self.load_grid(out_s))

    def test_constant_history_gives_constant_grid(self, tmp_path):
        history = tmp_path / "hist.csv"
        rng = np.random.default_rng(0)
        rows = ["stage,index,x_1,x_2,f_raw,f_scaled,radius,fallback"]
        for i in range(6):
            x, y = (float(v) for v in rng.random(2))
            rows.append(f"initial,{i},{x!r},{y!r},2.5,1.0,,0")
        history.write_text("\n".join(rows) + "\n")
        out = tmp_path / "surface.csv"
        assert main(
            ["surface", "--history", str(history), "--resolution", "11",
             "--unscaled", "--out", str(out)]
        ) == EXIT_OK
        grid = self.load_grid(out)
        np.testing.assert_allclose(grid, 2.5, atol=1e-7)

    def test_rejects_short_history(self, tmp_path, capsys):
        history = tmp_path / "hist.csv"
        history.write_text(
            "stage,index,x_1,x_2,f_raw,f_scaled,radius,fallback\n"
            "initial,0,0.1,0.2,1.0,1.0,,0\n"
            "initial,1,0.9,0.8,2.0,1.0,,0\n"
        )
        assert main(["surface", "--history", str(history), "--out",
                     str(tmp_path / "s.csv")]) == EXIT_CONFIG
        assert "at least" in capsys.readouterr().err

    def test_rejects_non_planar_history(self, tmp_path, capsys):
        history = tmp_path / "hist.csv"
        header = "stage,index,x_1,x_2,x_3,f_raw,f_scaled,radius,fallback"
        rows = [header] + [
            f"initial,{i},{0.1 * i},{0.2 * i},{0.15 * i},1.0,1.0,,0" for i in range(6)
        ]
        history.write_text("\n".join(rows) + "\n")
        assert main(["surface", "--history", str(history), "--out",
                     str(tmp_path / "s.csv")]) == EXIT_CONFIG
        assert "2-dimensional" in capsys.readouterr().err

    def test_rejects_malformed_header(self, tmp_path, capsys):
        history = tmp_path / "hist.csv"
        history.write_text("a,b,c\n1,2,3\n")
        assert main(["surface", "--history", str(history), "--out",
                     str(tmp_path / "s.csv")]) == EXIT_CONFIG
        assert "header" in capsys.readouterr().err


class TestFormatting:
    def test_floats_round_trip(self):
        values = [0.1, 1.0 / 3.0, 1e-17, 123456.789, 0.0]
        for value in values:
            assert float(format_float(value)) == value
