"""Preprocessing walkthrough: type inference, encoding, scaling, splits.

No manual feature typing: columns that parse as numbers are numerical,
everything else is categorical. Categories get ordinal codes, missing
cells get the training mode, and every column lands in [0, 1].

Run: python3 demos/03_tabular_preprocessing.py
"""

import tempfile
from pathlib import Path

import numpy as np

from mambatab import tabular
from mambatab.tabular import SchemaConfig

csv_text = """age,job,balance,default,outcome
39,technician,1200,no,good
?,manager,350,no,good
51,technician,,yes,bad
28,services,4100,no,good
44,manager,90,yes,bad
61,,230,no,bad
33,technician,781,no,good
47,services,1550,no,good
52,manager,2900,yes,bad
36,technician,670,no,good
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "bank.csv"
    path.write_text(csv_text)
    table = tabular.load_csv(path, SchemaConfig(label_column="outcome", positive_label="good"))

print(f"{table.n_rows} rows, {table.n_features} feature columns: {table.column_names}")
kinds = tabular.infer_column_kinds(table)
for name, kind in zip(table.column_names, kinds):
    print(f"  {name:8s} -> {kind}")

tr, va, te = tabular.split(table, seed=0)
print(f"\nsplit sizes: train {tr.n_rows}, val {va.n_rows}, test {te.n_rows}")

pre = tabular.fit(tr)
print("\nfitted state (train split only, so the test set never leaks):")
for j, name in enumerate(pre.column_names):
    if pre.kinds[j] == "categorical":
        print(f"  {name:8s} categories={pre.categories[j]} mode={pre.modes[j]!r}")
    else:
        print(f"  {name:8s} range=[{pre.mins[j]:g}, {pre.maxs[j]:g}] mode={pre.modes[j]:g}")

enc = tabular.transform(pre, te)
print(f"\nencoded test rows (all values in [0, 1]):\n{np.round(enc.values, 3)}")
assert enc.values.min() >= 0.0 and enc.values.max() <= 1.0

plan = tabular.make_incremental_plan(table.n_features, seed=7)
print(f"\nincremental plan over {table.n_features} columns:")
print(f"  s1={plan.s1} s2={plan.s2} s3={plan.s3}")
print(f"  cumulative sets: {plan.cumulative()}")
