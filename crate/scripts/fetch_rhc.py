#!/usr/bin/env python3
"""Download the SUPPORT right heart catheterization data and write a numeric CSV.

Usage:
    python3 scripts/fetch_rhc.py                 # writes data/rhc.csv
    python3 scripts/fetch_rhc.py --synthetic 400 # writes data/rhc_synthetic.csv

The output has the outcome `los` (length of stay in days), the treatment
`rhc` (0/1) and numeric covariates, with categorical variables expanded into
0/1 indicators (first level dropped). Rows are never dropped; the two
covariates with heavy missingness (adld3p, urin1) are excluded.
"""

import argparse
import csv
import io
import random
import sys
import urllib.request
from pathlib import Path

URL = "https://hbiostat.org/data/repo/rhc.csv"

NUMERIC = [
    "age", "edu", "das2d3pc", "aps1", "scoma1", "meanbp1", "wblc1", "hrt1", "resp1", "temp1",
    "pafi1", "alb1", "hema1", "bili1", "crea1", "sod1", "pot1", "paco21", "ph1", "wtkilo1",
    "cardiohx", "chfhx", "dementhx", "psychhx", "chrpulhx", "renalhx", "liverhx", "gibledhx",
    "malighx", "immunhx", "transhx", "amihx", "surv2md1",
]
YES_NO = ["resp", "card", "neuro", "gastr", "renal", "meta", "hema", "seps", "trauma", "ortho", "dnr1"]
CATEGORICAL = {
    "cat1": ["ARF", "CHF", "Cirrhosis", "Colon Cancer", "Coma", "COPD", "Lung Cancer", "MOSF w/Malignancy", "MOSF w/Sepsis"],
    "cat2": ["NA", "Cirrhosis", "Colon Cancer", "Coma", "Lung Cancer", "MOSF w/Malignancy", "MOSF w/Sepsis"],
    "ca": ["No", "Yes", "Metastatic"],
    "ninsclas": ["Private", "Medicaid", "Medicare", "Medicare & Medicaid", "No insurance", "Private & Medicare"],
    "race": ["white", "black", "other"],
    "income": ["Under $11k", "$11-$25k", "$25-$50k", "> $50k"],
    "sex": ["Male", "Female"],
}


def slug(text):
    return "".join(c if c.isalnum() else "_" for c in text).strip("_").lower()


def header():
    cols = ["los", "rhc"] + NUMERIC + YES_NO
    for var, levels in CATEGORICAL.items():
        cols += [f"{var}_{slug(level)}" for level in levels[1:]]
    return cols


def encode(row):
    out = {
        "los": float(row["dschdte"]) - float(row["sadmdte"]),
        "rhc": 1 if row["swang1"] == "RHC" else 0,
    }
    for var in NUMERIC:
        out[var] = float(row[var])
    for var in YES_NO:
        out[var] = 1 if row[var] == "Yes" else 0
    for var, levels in CATEGORICAL.items():
        value = row[var] if row[var] != "" else "NA"
        for level in levels[1:]:
            out[f"{var}_{slug(level)}"] = 1 if value == level else 0
    return out


def synthetic(n, seed=7):
    rng = random.Random(seed)
    rows = []
    for _ in range(n):
        r = {c: 0 for c in header()}
        for var in NUMERIC:
            r[var] = round(rng.gauss(0.0, 1.0), 4)
        for var in YES_NO:
            r[var] = int(rng.random() < 0.2)
        for var, levels in CATEGORICAL.items():
            k = rng.randrange(len(levels))
            if k > 0:
                r[f"{var}_{slug(levels[k])}"] = 1
        lin = -0.5 + 0.4 * r["aps1"] - 0.3 * r["age"]
        r["rhc"] = int(rng.random() < 1.0 / (1.0 + 2.718281828 ** (-lin)))
        r["los"] = round(2.0 + rng.expovariate(1.0 / (12.0 + 2.0 * r["rhc"] + 2.0 * r["aps1"] ** 2)), 2)
        rows.append(r)
    return rows


def write(rows, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=header(), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}", file=sys.stderr)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--synthetic", type=int, metavar="N", help="write an N-row synthetic fixture instead")
    ap.add_argument("--output", type=Path, help="output path")
    args = ap.parse_args()
    root = Path(__file__).resolve().parent.parent
    if args.synthetic:
        write(synthetic(args.synthetic), args.output or root / "data" / "rhc_synthetic.csv")
        return
    with urllib.request.urlopen(URL) as resp:
        text = resp.read().decode("utf-8")
    rows = [encode(r) for r in csv.DictReader(io.StringIO(text))]
    write(rows, args.output or root / "data" / "rhc.csv")


if __name__ == "__main__":
    main()
