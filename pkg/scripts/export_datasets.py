"""Write the bundled benchmark CSVs into ``data/``.

iris and wine come from scikit-learn; the rest are UCI/R datasets shipped as
CSV inside the ``pydataset`` source distribution. Pass the directory holding
its extracted ``rdata/csv`` tree::

    python scripts/export_datasets.py /tmp/res/resources/rdata/csv
"""
import sys
from pathlib import Path

import pandas as pd
from sklearn import datasets as skd

OUT = Path(__file__).resolve().parent.parent / "data"


def _from_sklearn(loader, name):
    bunch = loader()
    frame = pd.DataFrame(bunch.data, columns=[f"f{i}" for i in range(bunch.data.shape[1])])
    frame["class"] = [str(bunch.target_names[t]) for t in bunch.target]
    return name, frame


def _from_r(root, rel, label, drop=(), combine=None):
    frame = pd.read_csv(root / rel)
    frame = frame.drop(columns=[frame.columns[0], *drop])
    if combine:
        frame[label] = frame[combine[0]].astype(str) + "_" + frame[combine[1]].astype(str)
        frame = frame.drop(columns=[c for c in combine if c != label])
    frame = frame.dropna()
    labels = frame.pop(label).astype(str)
    frame["class"] = labels.values
    return frame


def main(rroot):
    rroot = Path(rroot)
    out = {}
    for loader, name in [(skd.load_iris, "iris"), (skd.load_wine, "wine")]:
        key, frame = _from_sklearn(loader, name)
        out[key] = frame
    out["glass"] = _from_r(rroot, "MASS/fgl.csv", "type")
    out["crabs"] = _from_r(rroot, "MASS/crabs.csv", "sp", drop=("index",), combine=("sp", "sex"))
    out["skulls"] = _from_r(rroot, "HSAUR/skulls.csv", "epoch")
    out["pima"] = _from_r(rroot, "MASS/Pima.tr.csv", "type")
    out["cats"] = _from_r(rroot, "MASS/cats.csv", "Sex")
    out["biopsy"] = _from_r(rroot, "MASS/biopsy.csv", "class", drop=("ID",))
    out["synth"] = _from_r(rroot, "MASS/synth.tr.csv", "yc")
    out["kyphosis"] = _from_r(rroot, "rpart/kyphosis.csv", "Kyphosis")
    OUT.mkdir(exist_ok=True)
    for name, frame in out.items():
        frame.to_csv(OUT / f"{name}.csv", index=False)
        print(name, frame.shape, frame["class"].value_counts().to_dict())


if __name__ == "__main__":
    main(sys.argv[1])
