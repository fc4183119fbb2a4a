import re
import tempfile
import unittest
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from odormap.clustering import average_linkage
from odormap.core import DistanceMatrix, ItemSet, OdorMapError, load_item_list
from odormap.embedding import EmbeddingResult
from odormap.render import (
    DEFAULT_COLOR,
    ESSENTIAL_OIL_GROUP_COLORS,
    GroupSpec,
    dendrogram_svg,
    load_group_csv,
    map_svg,
    render_dendrogram,
    render_map,
)
from odormap.svg import Circle, Text, fmt_num

NS = "{http://www.w3.org/2000/svg}"
DATA = Path(__file__).parent.parent / "odormap" / "data"


def embedding(labels, seed=0, k=2):
    coords = np.random.default_rng(seed).normal(size=(len(labels), k))
    return EmbeddingResult(ItemSet.of(labels), coords, None, None, k)


def point_fills(svg_text):
    root = ET.fromstring(svg_text.encode("utf-8"))
    points = [g for g in root.iter(f"{NS}g") if g.get("class") == "points"][0]
    return [c.get("fill") for c in points.iter(f"{NS}circle")]


class TestSvgWriter(unittest.TestCase):
    def test_number_format(self):
        self.assertEqual(fmt_num(1.0), "1")
        self.assertEqual(fmt_num(2.5), "2.5")
        self.assertEqual(fmt_num(-0.001), "0")
        self.assertEqual(fmt_num(3.14159), "3.14")

    def test_escaping_and_attributes(self):
        self.assertEqual(
            Text("a<b & c", 1, 2, font_size=10.0).render(),
            '<text x="1" y="2" font-size="10">a&lt;b &amp; c</text>',
        )
        self.assertEqual(Circle(0, 0, 4, class_="p").render(), '<circle cx="0" cy="0" r="4" class="p"/>')


class TestMap(unittest.TestCase):
    def test_three_points_no_groups(self):
        svg = map_svg(embedding(["rose", "lemon", "cedar"]))
        self.assertEqual(point_fills(svg), [DEFAULT_COLOR] * 3)
        for label in ("rose", "lemon", "cedar"):
            self.assertEqual(svg.count(f">{label}<"), 1)
        self.assertNotIn('class="legend"', svg)

    def test_essential_oil_groups(self):
        oils = load_item_list(DATA / "essential_oils.txt")
        groups = load_group_csv(DATA / "essential_oil_groups.csv")
        svg = map_svg(embedding(list(oils)), groups)
        fills = point_fills(svg)
        self.assertEqual(len(fills), 75)
        self.assertEqual(fills.count(DEFAULT_COLOR), 66)
        for color in ESSENTIAL_OIL_GROUP_COLORS.values():
            self.assertEqual(fills.count(color), 3)
        for label in oils:
            self.assertEqual(svg.count(f">{label}<"), 1, label)

    def test_byte_identical(self):
        groups = GroupSpec({"rose": "floral"})
        e = embedding(["rose", "lemon", "cedar", "lime"], seed=4)
        with tempfile.TemporaryDirectory() as tmp:
            a, b = Path(tmp) / "a.svg", Path(tmp) / "b.svg"
            render_map(e, groups, a)
            render_map(e, groups, b)
            self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_requires_2d(self):
        with self.assertRaises(OdorMapError):
            map_svg(embedding(["a", "b", "c"], k=3))

    def test_unknown_group_label(self):
        with self.assertRaises(OdorMapError):
            map_svg(embedding(["a", "b"]), GroupSpec({"zzz": "floral"}))


class TestGroups(unittest.TestCase):
    def test_palette_defaults(self):
        spec = GroupSpec({"rose": "Floral", "ethanol": "alcohol", "x": "other"})
        self.assertEqual(spec.color_of("rose"), "#8a2be2")
        self.assertEqual(spec.color_of("ethanol"), "#87ceeb")
        self.assertEqual(spec.color_of("unlisted"), DEFAULT_COLOR)
        self.assertTrue(spec.color_of("x").startswith("#"))

    def test_invalid_color(self):
        with self.assertRaises(OdorMapError):
            GroupSpec({"rose": "floral"}, {"floral": "purple"})

    def test_csv_conflicting_colors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "g.csv"
            path.write_text("label,group,color\nrose,floral,#111111\njasmine,floral,#222222\n")
            with self.assertRaises(OdorMapError):
                load_group_csv(path)

    def test_csv_without_colors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "g.csv"
            path.write_text("label,group\nlemon,citrus\n")
            self.assertEqual(load_group_csv(path).color_of("lemon"), "#2e8b57")


class TestDendrogramSvg(unittest.TestCase):
    def tree(self, xs):
        points = np.asarray(xs, dtype=float).reshape(-1, 1)
        labels = ItemSet.of(f"leaf{i}" for i in range(len(xs)))
        return average_linkage(DistanceMatrix.from_array(labels, squareform(pdist(points)))), labels

    def merge_heights(self, svg):
        root = ET.fromstring(svg.encode("utf-8"))
        heights = {}
        for path in root.iter(f"{NS}path"):
            if path.get("class") == "merge":
                heights[path.get("id")] = float(re.search(r"H([-\d.]+) V", path.get("d")).group(1))
        return heights

    def test_two_leaves(self):
        dg, labels = self.tree([0, 7])
        heights = self.merge_heights(dendrogram_svg(dg, labels))
        self.assertEqual(list(heights), ["merge-0"])

    def test_nested_brackets(self):
        dg, labels = self.tree([0, 1, 10])
        heights = self.merge_heights(dendrogram_svg(dg, labels))
        self.assertLess(heights["merge-0"], heights["merge-1"])
        x0 = heights["merge-1"] - 480.0
        self.assertAlmostEqual((heights["merge-0"] - x0) / 480.0, 1.0 / 9.5, places=2)

    def test_leaf_colors(self):
        dg, labels = self.tree([0, 1, 10])
        svg = dendrogram_svg(dg, labels, GroupSpec({"leaf2": "woody"}))
        self.assertIn('fill="#e03030">leaf2<', svg)

    def test_size_mismatch(self):
        dg, _ = self.tree([0, 1, 10])
        with self.assertRaises(OdorMapError):
            dendrogram_svg(dg, ItemSet.of(["a", "b"]))

    def test_byte_identical(self):
        dg, labels = self.tree([0, 1, 10, 12, 30])
        with tempfile.TemporaryDirectory() as tmp:
            a, b = Path(tmp) / "a.svg", Path(tmp) / "b.svg"
            render_dendrogram(dg, labels, None, a)
            render_dendrogram(dg, labels, None, b)
            self.assertEqual(a.read_bytes(), b.read_bytes())


if __name__ == "__main__":
    unittest.main()
