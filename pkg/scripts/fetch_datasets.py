#!/usr/bin/env python3
"""Fetch the two real datasets used by the optional acceptance checks.

Needs outbound network access. Files land in data/ by default:

  data/house-votes-84.data   UCI congressional voting records (435 x 16 votes
                             plus a leading party column)
  data/yeast_microarray.csv  419 x 70 yeast expression matrix exported from
                             the R package 'biclust' (BicatYeast)

The voting file is verified by shape (435 rows, 17 comma-separated fields)
and party counts (267 democrat, 168 republican). The microarray is pulled
from the CRAN source tarball of 'biclust' and decoded with pyreadr when that
package is installable; otherwise run the printed R one-liner instead.
"""

import argparse
import csv
import io
import subprocess
import sys
import tarfile
import urllib.request
from pathlib import Path

VOTING_URL = ("https://archive.ics.uci.edu/ml/machine-learning-databases/"
              "voting-records/house-votes-84.data")
BICLUST_URL = "https://cran.r-project.org/src/contrib/biclust_2.0.3.1.tar.gz"
R_EXPORT = ('R -e \'library(biclust); data(BicatYeast); '
            'write.csv(BicatYeast, "data/yeast_microarray.csv", row.names=FALSE)\'')


def fetch_voting(out: Path) -> None:
    raw = urllib.request.urlopen(VOTING_URL, timeout=60).read().decode("utf-8")
    rows = [line for line in raw.strip().splitlines() if line]
    assert len(rows) == 435, f"expected 435 rows, got {len(rows)}"
    parties = [r.split(",")[0] for r in rows]
    assert all(len(r.split(",")) == 17 for r in rows), "expected 17 fields per row"
    assert parties.count("democrat") == 267 and parties.count("republican") == 168
    out.write_text(raw if raw.endswith("\n") else raw + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(rows)} rows)")


def fetch_microarray(out: Path) -> None:
    try:
        import pyreadr
    except ImportError:
        print("pyreadr not installed; trying pip ...")
        subprocess.run([sys.executable, "-m", "pip", "install", "pyreadr"], check=True)
        import pyreadr
    blob = urllib.request.urlopen(BICLUST_URL, timeout=120).read()
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        member = next(m for m in tar.getmembers() if m.name.endswith("BicatYeast.rda"))
        rda = tar.extractfile(member).read()
    tmp = out.parent / "BicatYeast.rda"
    tmp.write_bytes(rda)
    frames = pyreadr.read_r(str(tmp))
    matrix = next(iter(frames.values()))
    tmp.unlink()
    assert matrix.shape == (419, 70), f"unexpected shape {matrix.shape}"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for _, row in matrix.iterrows():
            writer.writerow([f"{v!r}" for v in row.tolist()])
    print(f"wrote {out} {matrix.shape}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--skip-voting", action="store_true")
    parser.add_argument("--skip-microarray", action="store_true")
    args = parser.parse_args()
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    if not args.skip_voting:
        fetch_voting(data_dir / "house-votes-84.data")
    if not args.skip_microarray:
        try:
            fetch_microarray(data_dir / "yeast_microarray.csv")
        except Exception as exc:
            print(f"microarray fetch failed ({exc}); export it from R instead:\n  {R_EXPORT}")
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
