#!/usr/bin/env python3
"""Regenerates the bundled example data in data/.

Deterministic: fixed seeds, so rerunning reproduces the committed files.
"""
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def two_blobs(rng):
    n = 120
    centers = np.array([[0.0, 0.0], [4.0, 1.0]])
    rows = []
    for c, scale in zip(centers, (1.0, 2.5)):
        pts = c + 0.6 * rng.standard_normal((n, 2))
        w = scale * rng.uniform(0.5, 1.5, n)
        rows.extend(zip(pts[:, 0], pts[:, 1], w))
    order = rng.permutation(len(rows))
    lines = ["# two Gaussian blobs, the right one carries heavier marks", "x,y,weight"]
    lines += ["%.6f,%.6f,%.6f" % rows[i] for i in order]
    (OUT / "two_blobs.csv").write_text("\n".join(lines) + "\n")


def sdss_extract(rng):
    # Synthetic stand-in for a DR12 slice: galaxies scattered along two
    # filaments and a cluster in RA/DEC, redshift inside [0.110, 0.115].
    n_fil, n_clu, n_bg = 260, 120, 220
    t = rng.uniform(0, 1, n_fil)
    fil_a = np.c_[150 + 12 * t[: n_fil // 2], 2 + 5 * t[: n_fil // 2]]
    fil_b = np.c_[158 + 8 * t[n_fil // 2 :], 9 - 6 * t[n_fil // 2 :]]
    fil = np.r_[fil_a, fil_b] + 0.25 * rng.standard_normal((n_fil, 2))
    clu = np.array([156.0, 5.0]) + 0.4 * rng.standard_normal((n_clu, 2))
    bg = np.c_[rng.uniform(148, 172, n_bg), rng.uniform(0, 11, n_bg)]
    pos = np.r_[fil, clu, bg]
    n = len(pos)
    z = rng.uniform(0.110, 0.115, n)
    r = np.clip(rng.normal(16.6, 0.7, n), 13.5, 17.77)
    order = rng.permutation(n)
    lines = [
        "# synthetic SDSS-like extract: ra,dec in degrees, spectroscopic z, Petrosian r",
        "# records: %d" % n,
        "objid,ra,dec,z,r",
    ]
    for k, i in enumerate(order):
        lines.append("%d,%.5f,%.5f,%.6f,%.3f" % (1000 + k, pos[i, 0], pos[i, 1], z[i], r[i]))
    (OUT / "sdss_extract.csv").write_text("\n".join(lines) + "\n")


def four_galaxies(rng):
    w, h = 96, 72
    yy, xx = np.mgrid[0:h, 0:w] + 0.5
    # (x, y, sigma, peak); the last two overlap.
    blobs = [(20, 18, 4.5, 1.0), (76, 16, 5.0, 0.8), (38, 52, 5.0, 0.9), (53, 54, 4.5, 0.75)]
    img = np.zeros((h, w))
    for cx, cy, s, a in blobs:
        img += a * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
    img += 0.01 * rng.standard_normal(img.shape)
    img = np.clip(img, 0, None)
    q = np.round(img / img.max() * 255).astype(int)
    header = "P2\n# four synthetic galaxies, two overlapping\n%d %d\n255\n" % (w, h)
    body = "\n".join(" ".join(str(v) for v in row) for row in q)
    (OUT / "four_galaxies.pgm").write_text(header + body + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    two_blobs(np.random.default_rng(11))
    sdss_extract(np.random.default_rng(12))
    four_galaxies(np.random.default_rng(13))


if __name__ == "__main__":
    main()
