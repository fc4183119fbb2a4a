import contextlib
import io
import json
import re
import tempfile
import unittest
from pathlib import Path

import numpy as np

from odormap.core import load_item_list
from odormap.odormap import COMMANDS, main

DATA = Path(__file__).parent.parent / "odormap" / "data"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def write_profile(path, labels, seed=0, attributes=6):
    rng = np.random.default_rng(seed)
    lines = ["name," + ",".join(f"desc{j}" for j in range(attributes))]
    for label in labels:
        values = rng.uniform(0.1, 5.0, size=attributes)
        lines.append(label + "," + ",".join(f"{v:.4f}" for v in values))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestArguments(unittest.TestCase):
    def test_help(self):
        self.assertEqual(run("--help")[0], 0)
        for command in COMMANDS:
            with self.subTest(command=command):
                self.assertEqual(run(command, "--help")[0], 0)

    def test_version(self):
        self.assertEqual(run("--version")[0], 0)

    def test_unknown_subcommand(self):
        self.assertEqual(run("frobnicate")[0], 2)

    def test_unknown_flag(self):
        self.assertEqual(run("mantel", "--a", "x", "--b", "y", "--bogus")[0], 2)

    def test_missing_file(self):
        code, _, err = run("mds", "--dist", "/nonexistent/d.csv", "--out", "x.csv")
        self.assertEqual(code, 1)
        self.assertIn("odormap: error: FileNotFoundError:", err)


class TestPipeline(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return self.dir / name

    def test_mantel_label_mismatch(self):
        write_profile(self.path("p1.csv"), ["a", "b", "c", "d"], seed=1)
        write_profile(self.path("p2.csv"), ["a", "b", "c", "e"], seed=2)
        for i in (1, 2):
            self.assertEqual(
                run("distances", "--input", self.path(f"p{i}.csv"), "--out", self.path(f"d{i}.csv"))[0],
                0,
            )
        code, _, err = run("mantel", "--a", self.path("d1.csv"), "--b", self.path("d2.csv"))
        self.assertEqual(code, 1)
        errors = [line for line in err.splitlines() if line.startswith("odormap: error:")]
        self.assertEqual(len(errors), 1)
        self.assertTrue(errors[0].startswith("odormap: error: LabelMismatchError:"))

    def assert_one_error(self, result, kind):
        code, _, err = result
        self.assertEqual(code, 1)
        errors = [line for line in err.splitlines() if line.startswith("odormap: error:")]
        self.assertEqual(len(errors), 1, err)
        self.assertTrue(errors[0].startswith(f"odormap: error: {kind}:"), errors[0])

    def test_unknown_item_label(self):
        write_profile(self.path("p.csv"), ["a", "b", "c"])
        self.path("items.txt").write_text("a\nb\nzz\n", encoding="utf-8")
        result = run(
            "distances", "--input", self.path("p.csv"), "--items", self.path("items.txt"),
            "--out", self.path("d.csv"),
        )
        self.assert_one_error(result, "LabelMismatchError")
        self.assertIn("zz", result[2])
        self.assertFalse(self.path("d.csv").exists())

    def test_stray_dollar_in_template(self):
        self.path("items.txt").write_text("a\nb\nc\n", encoding="utf-8")
        self.path("t.txt").write_text("Rate $5 $item_a vs $item_b", encoding="utf-8")
        result = run(
            "harvest", "--items", self.path("items.txt"), "--mock-seed", "1",
            "--template", self.path("t.txt"), "--cache", self.path("c.jsonl"),
            "--out", self.path("s.csv"),
        )
        self.assert_one_error(result, "TemplateError")

    def test_zero_parallel_mock(self):
        self.path("items.txt").write_text("a\nb\nc\n", encoding="utf-8")
        result = run(
            "harvest", "--items", self.path("items.txt"), "--mock-seed", "1",
            "--max-parallel", "0", "--cache", self.path("c.jsonl"), "--out", self.path("s.csv"),
        )
        self.assert_one_error(result, "OdorMapError")

    def test_offline_pipeline(self):
        oils = DATA / "essential_oils.txt"
        cache = self.path("cache.jsonl")
        sim = self.path("mock.csv")
        code, out, _ = run(
            "harvest", "--items", oils, "--cache", cache, "--mock-seed", 42, "--out", sim
        )
        self.assertEqual(code, 0)
        self.assertIn("2775 requested", out)
        self.assertEqual(len(cache.read_text(encoding="utf-8").splitlines()), 2775)
        manifest = json.loads(Path(f"{sim}.manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["command"], "harvest")
        self.assertEqual(manifest["seeds"], {"mock_seed": 42})
        self.assertIn(str(oils), manifest["input_hashes"])

        code, out, _ = run(
            "harvest", "--items", oils, "--cache", cache, "--mock-seed", 42, "--out", sim
        )
        self.assertEqual(code, 0)
        self.assertIn("0 requested, 2775 cached", out)

        self.assertEqual(run("sim2dist", "--in", sim, "--out", self.path("llm.csv"))[0], 0)
        write_profile(self.path("profile.csv"), list(load_item_list(oils)), seed=3)
        self.assertEqual(
            run("distances", "--input", self.path("profile.csv"), "--metric", "cosine",
                "--out", self.path("cos.csv"))[0],
            0,
        )
        mantel_args = ("mantel", "--a", self.path("cos.csv"), "--b", self.path("llm.csv"),
                       "--permutations", 199, "--seed", 7)
        first, second = run(*mantel_args), run(*mantel_args)
        self.assertEqual(first[0], 0)
        line = re.search(r"r=-?\d\.\d{6} p=\S+ (\*{1,3}|ns)", first[1])
        self.assertIsNotNone(line)
        self.assertIn(line.group(0), second[1])

        outputs = {}
        for round_ in (1, 2):
            coords = self.path(f"coords{round_}.csv")
            tree = self.path(f"tree{round_}.json")
            self.assertEqual(
                run("mds", "--dist", self.path("llm.csv"), "--dims", 2, "--seed", 0,
                    "--out", coords)[0],
                0,
            )
            self.assertEqual(
                run("map", "--coords", coords, "--groups", DATA / "essential_oil_groups.csv",
                    "--out", self.path(f"map{round_}.svg"))[0],
                0,
            )
            self.assertEqual(
                run("cluster", "--dist", self.path("llm.csv"), "--out", tree, "--cut", 3)[0], 0
            )
            self.assertEqual(
                run("dendro", "--tree", tree, "--groups", DATA / "essential_oil_groups.csv",
                    "--out", self.path(f"tree{round_}.svg"))[0],
                0,
            )
            outputs[round_] = [
                self.path(name).read_bytes()
                for name in (f"coords{round_}.csv", f"map{round_}.svg", f"tree{round_}.svg",
                             f"tree{round_}.k3.csv")
            ]
        self.assertEqual(outputs[1], outputs[2])
        self.assertTrue(Path(f"{self.path('tree1.json')}.manifest.json").exists())

    def test_replay(self):
        write_profile(self.path("profile.csv"), [f"odor{i}" for i in range(8)], seed=5)
        dist = self.path("d.csv")
        coords = self.path("coords.csv")
        run("distances", "--input", self.path("profile.csv"), "--metric", "euclidean", "--out", dist)
        self.assertEqual(run("mds", "--dist", dist, "--seed", 3, "--out", coords)[0], 0)
        before = coords.read_bytes()
        coords.unlink()
        self.assertEqual(run("--replay", f"{coords}.manifest.json")[0], 0)
        self.assertEqual(coords.read_bytes(), before)

    def test_grid_and_pairs(self):
        labels = [f"odor{i}" for i in range(6)]
        write_profile(self.path("profile.csv"), labels, seed=9)
        paths = []
        for metric in ("euclidean", "cosine", "correlation"):
            paths.append(self.path(f"{metric}.csv"))
            run("distances", "--input", self.path("profile.csv"), "--metric", metric,
                "--out", paths[-1])
        code, out, _ = run("grid", "--matrices", *paths, "--permutations", 99,
                           "--out", self.path("grid.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(len(self.path("grid.csv").read_text().splitlines()), 4)
        self.assertTrue(self.path("grid.r.csv").exists())

        code, _, _ = run("pairs", "--a", paths[0], "--b", paths[1], "--bins", 5,
                         "--out", self.path("pairs.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(len(self.path("pairs.csv").read_text().splitlines()), 16)
        self.assertEqual(len(self.path("pairs.hist.csv").read_text().splitlines()), 11)

    def test_sweep(self):
        write_profile(self.path("profile.csv"), [f"odor{i}" for i in range(8)], seed=2)
        dist = self.path("d.csv")
        run("distances", "--input", self.path("profile.csv"), "--out", dist)
        code, out, _ = run("sweep", "--dist", dist, "--max-dims", 4, "--out", self.path("s.csv"))
        self.assertEqual(code, 0)
        self.assertEqual(len(self.path("s.csv").read_text().splitlines()), 5)


if __name__ == "__main__":
    unittest.main()
