import numpy as np
import pytest

from floodsim import ConfigurationError, MetricsRecord, parse_config, serialize_config
from floodsim.cli import main
from floodsim.metrics import emit_metrics, read_metrics

MINIMAL = """
[data]
source = "synthetic"

[server]
rounds = 3
"""

TINY_RUN = """
[experiment]
seeds = [1, 2]
methods = ["flood", "fedavg"]

[data]
source = "synthetic"
num_classes = 3
dim = 4
samples_per_class = 30
test_samples_per_class = 10
noise_sigma = 0.3

[partition]
protocol = "pathological"
r = 2

[server]
num_clients = 4
clients_per_round = 2
rounds = 4
final_window = 3
hidden_units = 8

[client]
local_epochs = 1
batch_size = 8
lr = 0.05

[schedule]
a = 2.0
halt_round = 4
"""


class TestParseConfig:
    def test_minimal_config_gets_paper_defaults(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(MINIMAL)
        cfg = parse_config(path)
        assert cfg.client.q == 0.7
        assert cfg.client.schedule.a == 200.0
        assert cfg.client.schedule.halt_round == 1000
        assert cfg.server.alpha == 0.5
        assert cfg.server.rounds == 3
        assert cfg.client.lr == 0.01 and cfg.client.momentum == 0.9
        assert cfg.server.lr_decay == 0.998
        assert cfg.client.scorer.kind == "energy"

    def test_out_of_domain_q_names_field(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(MINIMAL + "\n[client]\nq = 1.5\n")
        with pytest.raises(ConfigurationError, match="q"):
            parse_config(path)

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(MINIMAL + "\n[client]\nlocal_epoch = 3\n")
        with pytest.raises(ConfigurationError, match="local_epoch"):
            parse_config(path)

    def test_unknown_section_named(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(MINIMAL + "\n[clients]\nx = 1\n")
        with pytest.raises(ConfigurationError, match="clients"):
            parse_config(path)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text(TINY_RUN)
        cfg = parse_config(path)
        path2 = tmp_path / "c2.toml"
        path2.write_text(serialize_config(cfg))
        assert parse_config(path2) == cfg

    def test_desk_preset_parses(self):
        cfg = parse_config("configs/desk.toml")
        assert cfg.server.num_clients == 20
        assert cfg.partition.r == 2


class TestMetricsFile:
    def _record(self, i):
        return MetricsRecord(
            round=i,
            test_accuracy=0.1 * i + 1e-9,
            test_loss=2.0 / (i + 1),
            mean_phi=-1.5 + i * 0.017,
            mean_lambda=float(i),
            update_norm=np.pi * (i + 1),
            wall_ms=12,
        )

    def test_empty_run_header_only(self, tmp_path):
        path = tmp_path / "m.csv"
        emit_metrics([], path)
        assert path.read_text() == "round,test_accuracy,test_loss,mean_phi,mean_lambda,update_norm\n"
        assert read_metrics(path) == []

    def test_single_record_round_trip(self, tmp_path):
        path = tmp_path / "m.csv"
        emit_metrics([self._record(0)], path)
        back = read_metrics(path)[0]
        original = self._record(0)
        for name in ("round", "test_accuracy", "test_loss", "mean_phi", "mean_lambda", "update_norm"):
            assert getattr(back, name) == getattr(original, name)

    def test_hundred_records_exact_recovery(self, tmp_path):
        path = tmp_path / "m.csv"
        records = [self._record(i) for i in range(100)]
        emit_metrics(records, path)
        back = read_metrics(path)
        assert len(back) == 100
        for a, b in zip(back, records):
            assert a.test_accuracy == b.test_accuracy  # exact, 17 sig digits
            assert a.update_norm == b.update_norm


class TestRunCli:
    def test_matrix_writes_cells_and_summary(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(TINY_RUN)
        out = tmp_path / "results"
        rc = main(["run", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        files = sorted(p.name for p in out.iterdir())
        assert files == [
            "fedavg_seed1.csv", "fedavg_seed2.csv",
            "flood_seed1.csv", "flood_seed2.csv", "summary.csv",
        ]
        stdout = capsys.readouterr().out
        assert "flood" in stdout and "fedavg" in stdout

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(TINY_RUN)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["run", "--config", str(cfg_path), "--out", str(out1)]) == 0
        assert main(["run", "--config", str(cfg_path), "--out", str(out2)]) == 0
        for name in ("flood_seed1.csv", "fedavg_seed2.csv", "summary.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_summary_recomputable_from_metrics_files(self, tmp_path):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(TINY_RUN)
        out = tmp_path / "results"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        summary = {}
        for line in (out / "summary.csv").read_text().splitlines()[1:]:
            method, n, mean, std = line.split(",")
            summary[method] = (float(mean), float(std))
        window = 3  # final_window in TINY_RUN
        for method in ("flood", "fedavg"):
            accs = []
            for seed in (1, 2):
                recs = read_metrics(out / f"{method}_seed{seed}.csv")
                accs.extend(r.test_accuracy for r in recs[-window:])
            assert summary[method][0] == pytest.approx(np.mean(accs), abs=1e-9)
            assert summary[method][1] == pytest.approx(np.std(accs), abs=1e-9)

    def test_seed_and_method_overrides(self, tmp_path):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(TINY_RUN)
        out = tmp_path / "results"
        rc = main([
            "run", "--config", str(cfg_path),
            "--methods", "fedprox", "--seeds", "7", "--out", str(out),
        ])
        assert rc == 0
        assert sorted(p.name for p in out.iterdir()) == ["fedprox_seed7.csv", "summary.csv"]

    def test_adding_methods_never_perturbs_existing_cells(self, tmp_path):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(TINY_RUN)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["run", "--config", str(cfg_path), "--methods", "flood",
                     "--out", str(out1)]) == 0
        assert main(["run", "--config", str(cfg_path), "--methods", "flood,fedavgm",
                     "--out", str(out2)]) == 0
        assert (out1 / "flood_seed1.csv").read_bytes() == (out2 / "flood_seed1.csv").read_bytes()

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(MINIMAL + "\n[client]\nq = 3.0\n")
        rc = main(["run", "--config", str(cfg_path)])
        assert rc == 1
        assert "q" in capsys.readouterr().err

    def test_missing_config_exits_nonzero(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 1


class TestOtherCommands:
    def test_gen_data(self, tmp_path):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(TINY_RUN)
        out = tmp_path / "data.csv"
        assert main(["gen-data", "--spec", str(cfg_path), "--out", str(out)]) == 0
        from floodsim import load_csv

        ds = load_csv(out)
        assert len(ds) == 90 and ds.num_classes == 3

    def test_partition_stats(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(TINY_RUN)
        assert main(["partition-stats", "--config", str(cfg_path)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "client,class0,class1,class2"
        assert len(lines) == 5  # header + 4 clients
        # each client holds exactly r=2 classes
        for line in lines[1:]:
            counts = [int(c) for c in line.split(",")[1:]]
            assert sum(c > 0 for c in counts) == 2
