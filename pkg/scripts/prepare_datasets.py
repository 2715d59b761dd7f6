"""Build the bundled benchmark files under data/.

Adult Income and Contraception are built from the UCI files shipped inside
two PyPI wheels (``responsibly`` carries adult.data / adult.test, ``keel-ds``
carries cmc.data as contraceptive.dat); they are fetched with ``pip download``
unless ``--wheel-dir`` already holds them.

Cars and Nursery could not be obtained offline. Both UCI sets enumerate their
whole feature space, so the proxies here do the same over the exact UCI
schemas, with labels from a hand-written hierarchical scoring function (see
``cars_label`` and ``nursery_label``). Their labels are synthetic.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import subprocess
import sys
import zipfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

# --------------------------------------------------------------------------
# Adult Income

ADULT_COLS = ["age", "workclass", "fnlwgt", "education", "education_num", "marital_status", "occupation",
              "relationship", "race", "sex", "capital_gain", "capital_loss", "hours_per_week", "native_country",
              "income"]

EDUCATION = {
    "Preschool": "elementary", "1st-4th": "elementary", "5th-6th": "elementary", "7th-8th": "elementary",
    "9th": "high_school_dropout", "10th": "high_school_dropout", "11th": "high_school_dropout",
    "12th": "high_school_dropout", "HS-grad": "high_school", "Some-college": "some_college",
    "Assoc-acdm": "associate", "Assoc-voc": "associate", "Bachelors": "bachelors", "Masters": "masters",
    "Prof-school": "doctorate_or_prof", "Doctorate": "doctorate_or_prof",
}
MARITAL = {
    "Married-civ-spouse": "married", "Married-AF-spouse": "married", "Never-married": "never_married",
    "Divorced": "previously_married", "Separated": "previously_married", "Widowed": "previously_married",
    "Married-spouse-absent": "previously_married",
}
OCCUPATIONS = ["Adm-clerical", "Armed-Forces", "Craft-repair", "Exec-managerial", "Farming-fishing",
               "Handlers-cleaners", "Machine-op-inspct", "Other-service", "Priv-house-serv", "Prof-specialty",
               "Protective-serv", "Sales", "Tech-support", "Transport-moving"]

ADULT_SCHEMA = [
    ("age", ["low", "mid", "high"]),
    ("capital_gain", ["low", "mid", "high"]),
    ("capital_loss", ["low", "mid", "high"]),
    ("hours_per_week", ["low", "mid", "high"]),
    ("marital_status", ["married", "never_married", "previously_married"]),
    ("occupation", OCCUPATIONS),
    ("sex", ["Female", "Male"]),
    ("education", ["elementary", "high_school_dropout", "high_school", "some_college", "associate", "bachelors",
                   "masters", "doctorate_or_prof"]),
    ("native_country", ["US", "non_US"]),
]
ADULT_NUMERIC = ["age", "capital_gain", "capital_loss", "hours_per_week"]


def adult_rows(raw_files):
    for text in raw_files:
        for line in text.splitlines():
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != len(ADULT_COLS):
                continue  # blank lines and the "|1x3 Cross validator" header
            rec = dict(zip(ADULT_COLS, parts))
            if "?" in (rec["occupation"], rec["native_country"]):
                continue
            yield {
                "age": rec["age"], "capital_gain": rec["capital_gain"], "capital_loss": rec["capital_loss"],
                "hours_per_week": rec["hours_per_week"], "marital_status": MARITAL[rec["marital_status"]],
                "occupation": rec["occupation"], "sex": rec["sex"], "education": EDUCATION[rec["education"]],
                "native_country": "US" if rec["native_country"] == "United-States" else "non_US",
                "income": rec["income"].rstrip("."),
            }


# --------------------------------------------------------------------------
# Contraception (cmc.data)

CMC_SCHEMA = [
    ("wife_age", ["low", "mid", "high"]),
    ("media_exposure", ["good", "not_good"]),
    ("wife_education", ["1", "2", "3", "4"]),
    ("husband_education", ["1", "2", "3", "4"]),
    ("num_children", ["low", "mid", "high"]),
    ("husband_occupation", ["1", "2", "3", "4"]),
    ("wife_religion", ["non_islam", "islam"]),
    ("wife_working", ["yes", "no"]),
    ("standard_of_living", ["1", "2", "3", "4"]),
]


def cmc_rows(text):
    for line in text.splitlines():
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 10:
            continue
        age, wedu, hedu, kids, rel, work, hocc, sol, media, method = parts
        yield {
            "wife_age": age, "media_exposure": ["good", "not_good"][int(media)], "wife_education": wedu,
            "husband_education": hedu, "num_children": kids, "husband_occupation": hocc,
            "wife_religion": ["non_islam", "islam"][int(rel)], "wife_working": ["yes", "no"][int(work)],
            "standard_of_living": sol, "contraceptive_use": "0" if method == "1" else "1",
        }


# --------------------------------------------------------------------------
# synthetic-label proxies over the full UCI feature spaces

CARS_SCHEMA = [
    ("persons", ["2", "4", "more"]),
    ("lug_boot", ["small", "med", "big"]),
    ("doors", ["2", "3", "4", "5more"]),
    ("safety", ["low", "med", "high"]),
    ("maint", ["vhigh", "high", "med", "low"]),
    ("buying", ["vhigh", "high", "med", "low"]),
]
CARS_THRESHOLD = 6


def cars_label(r) -> int:
    if r["persons"] == "2" or r["safety"] == "low":
        return 0
    cheap = {"vhigh": 0, "high": 1, "med": 2, "low": 3}
    price = cheap[r["buying"]] + cheap[r["maint"]]
    comfort = (r["persons"] == "more") + {"small": 0, "med": 1, "big": 2}[r["lug_boot"]] + (r["doors"] != "2")
    tech = comfort + {"med": 0, "high": 2}[r["safety"]]
    return int(price >= 1 and price + tech >= CARS_THRESHOLD)


NURSERY_SCHEMA = [
    ("parents", ["usual", "pretentious", "great_pret"]),
    ("housing", ["convenient", "less_conv", "critical"]),
    ("social", ["nonprob", "slightly_prob", "problematic"]),
    ("has_nurs", ["proper", "less_proper", "improper", "critical", "very_crit"]),
    ("finance", ["convenient", "inconv"]),
    ("health", ["recommended", "priority", "not_recom"]),
    ("form", ["complete", "completed", "incomplete", "foster"]),
    ("children", ["1", "2", "3", "more"]),
]
NURSERY_THRESHOLD = 8


def nursery_label(r) -> int:
    if r["health"] == "not_recom":
        return 0
    employ = {"usual": 2, "pretentious": 1, "great_pret": 0}[r["parents"]] + \
        {"proper": 2, "less_proper": 2, "improper": 1, "critical": 0, "very_crit": 0}[r["has_nurs"]]
    struct = {"complete": 2, "completed": 2, "incomplete": 1, "foster": 0}[r["form"]] + \
        {"1": 2, "2": 1, "3": 0, "more": 0}[r["children"]]
    finan = {"convenient": 2, "less_conv": 1, "critical": 0}[r["housing"]] + (r["finance"] == "convenient")
    soc = {"nonprob": 2, "slightly_prob": 1, "problematic": 0}[r["social"]] + (r["health"] == "recommended")
    return int(employ + struct + finan + soc >= NURSERY_THRESHOLD)


def full_space(schema, label_fn, label_name):
    names = [n for n, _ in schema]
    for values in itertools.product(*(v for _, v in schema)):
        rec = dict(zip(names, values))
        rec[label_name] = str(label_fn(rec))
        yield rec


# --------------------------------------------------------------------------
# output


def write_dataset(name, schema, rows, label, numeric=(), bins=3):
    out = ROOT / "data" / name
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}.schema").write_text("".join(f"{n}: {', '.join(v)}\n" for n, v in schema))
    if numeric:
        (out / f"{name}.bins").write_text("".join(f"{c}: numeric, bins={bins}\n" for c in numeric))
    rows = list(rows)
    cols = [n for n, _ in schema] + [label]
    with open(out / f"{name}.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    pos = sum(r[label] in ("1", ">50K") for r in rows)
    print(f"{name}: {len(rows)} rows, {pos} positive ({pos / len(rows):.3f})")
    return rows


def fetch_wheel(pkg: str, wheel_dir: Path) -> Path:
    found = sorted(wheel_dir.glob(f"{pkg.replace('-', '_')}-*.whl"))
    if not found:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-d", str(wheel_dir), pkg],
                       check=True)
        found = sorted(wheel_dir.glob(f"{pkg.replace('-', '_')}-*.whl"))
    return found[-1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--wheel-dir", type=Path, default=Path("/tmp/nn2rules-wheels"))
    args = ap.parse_args(argv)
    args.wheel_dir.mkdir(parents=True, exist_ok=True)

    resp = zipfile.ZipFile(fetch_wheel("responsibly", args.wheel_dir))
    adult_raw = [resp.read(f"responsibly/dataset/adult/{f}").decode() for f in ("adult.data", "adult.test")]
    write_dataset("adult", ADULT_SCHEMA, adult_rows(adult_raw), "income", ADULT_NUMERIC)

    keel = zipfile.ZipFile(fetch_wheel("keel-ds", args.wheel_dir))
    cmc_raw = keel.read("keel_ds/data/balanced/raw/contraceptive.dat").decode()
    write_dataset("contraception", CMC_SCHEMA, cmc_rows(cmc_raw), "contraceptive_use",
                  ["wife_age", "num_children"])

    cars = write_dataset("cars", CARS_SCHEMA, full_space(CARS_SCHEMA, cars_label, "acceptable"), "acceptable")
    # sanity check against the real UCI labels that are available: every
    # car rated good or vgood must be acceptable under the proxy
    uci_cols = ["buying", "maint", "doors", "persons", "lug_boot", "safety"]
    proxy = {tuple(r[c] for c in uci_cols): r["acceptable"] for r in cars}
    for sub in ("car-good", "car-vgood"):
        text = keel.read(f"keel_ds/data/imbalanced/raw/{sub}.dat").decode()
        good = [tuple(p.strip() for p in line.split(",")[:6]) for line in text.splitlines()
                if line.strip().endswith("positive")]
        agree = sum(proxy[g] == "1" for g in good)
        print(f"  cars proxy marks {agree}/{len(good)} UCI '{sub[4:]}' cars acceptable")

    write_dataset("nursery", NURSERY_SCHEMA, full_space(NURSERY_SCHEMA, nursery_label, "admitted"), "admitted")


if __name__ == "__main__":
    main()
