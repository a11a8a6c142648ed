"""PPM/PGM reader and writer tests"""
import sys
import os
import tempfile
import unittest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

import numpy as np
from utils.pnm import PnmFormatError, read_pgm, read_ppm, write_pgm, write_ppm


class TestPnm(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.dir, name)

    def write_bytes(self, name, data):
        with open(self.path(name), "wb") as f:
            f.write(data)
        return self.path(name)

    def test_ppm_roundtrip(self):
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, size=(3, 5, 7)) / 255
        write_ppm(self.path("a.ppm"), image)
        np.testing.assert_array_equal(read_ppm(self.path("a.ppm")), image)

    def test_ppm_layout(self):
        image = np.zeros((3, 1, 2))
        image[0, 0, 0] = 1.0   # red first pixel
        image[2, 0, 1] = 1.0   # blue second pixel
        write_ppm(self.path("b.ppm"), image)
        with open(self.path("b.ppm"), "rb") as f:
            data = f.read()
        self.assertEqual(data, b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 0, 255]))

    def test_header_comments(self):
        path = self.write_bytes("c.ppm", b"P6\n# made by hand\n1 1\n# depth\n255\n" +
                                bytes([0, 128, 255]))
        np.testing.assert_allclose(read_ppm(path)[:, 0, 0], [0, 128 / 255, 1])

    def test_wrong_magic(self):
        path = self.write_bytes("d.ppm", b"P3\n1 1\n255\n0 0 0\n")
        with self.assertRaises(PnmFormatError):
            read_ppm(path)

    def test_truncated_raster(self):
        path = self.write_bytes("e.ppm", b"P6\n2 2\n255\n" + bytes(5))
        with self.assertRaises(PnmFormatError):
            read_ppm(path)

    def test_truncated_header(self):
        path = self.write_bytes("f.ppm", b"P6\n2 2")
        with self.assertRaises(PnmFormatError):
            read_ppm(path)

    def test_sixteen_bit_rejected(self):
        path = self.write_bytes("g.ppm", b"P6\n1 1\n65535\n" + bytes(6))
        with self.assertRaises(PnmFormatError):
            read_ppm(path)

    def test_format_error_is_value_error(self):
        path = self.write_bytes("h.ppm", b"garbage")
        with self.assertRaises(ValueError):
            read_ppm(path)

    def test_missing_file(self):
        with self.assertRaises(OSError):
            read_ppm(self.path("missing.ppm"))

    def test_pgm_roundtrip(self):
        image = np.linspace(0, 1, 12).reshape(3, 4)
        write_pgm(self.path("a.pgm"), image)
        out = read_pgm(self.path("a.pgm"))
        self.assertEqual(out.shape, (3, 4))
        np.testing.assert_allclose(out, image, atol=0.5 / 255)

    def test_writers_clip_and_validate(self):
        write_pgm(self.path("clip.pgm"), np.array([[-1.0, 2.0]]))
        np.testing.assert_array_equal(read_pgm(self.path("clip.pgm")), [[0.0, 1.0]])
        with self.assertRaises(ValueError):
            write_pgm(self.path("bad.pgm"), np.zeros((1, 2, 2)))
        with self.assertRaises(ValueError):
            write_ppm(self.path("bad.ppm"), np.zeros((2, 2)))


if __name__ == '__main__':
    unittest.main()
