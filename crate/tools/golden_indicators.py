"""Independent computation of every indicator for a bundle directory.

Reads the manifest and raw little-endian f32 tensors with numpy and writes
the expected indicator table as CSV (17 significant digits, empty cell for
undefined values). Used to produce the committed golden file.

    python3 tools/golden_indicators.py BUNDLE_DIR OUT_CSV [ALPHA ...]
"""
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np


def load(root):
    manifest = json.loads((root / "manifest.json").read_text())
    n, k = len(manifest["items"]), manifest["k"]
    models = []
    for m in manifest["models"]:
        ck = np.fromfile(root / m["checkpoint_tensor"]["path"], dtype="<f4").astype(np.float64)
        ly = np.fromfile(root / m["layer_tensor"]["path"], dtype="<f4").astype(np.float64)
        models.append((ck.reshape(-1, n, k), ly.reshape(-1, n, k)))
    return manifest, models


def entropy(p):
    return float(-sum(x * math.log(x) for x in p if x > 0))


def majority(votes):
    top = max(votes)
    winners = [c for c, v in enumerate(votes) if v == top]
    return winners[0] if len(winners) == 1 else None


def suffix(labels, y):
    if labels[-1] != y:
        return 1.0
    j = len(labels)
    while j > 0 and labels[j - 1] == y:
        j -= 1
    return (j + 1) / (len(labels) + 1)


def cp_threshold(scores, alpha):
    n = len(scores)
    need = (n + 1) * (1 - alpha)
    count = max(1, math.ceil(need - 1e-9))
    if count > n:
        return None
    return sorted(scores, reverse=True)[count - 1]


def main():
    root, out = Path(sys.argv[1]), Path(sys.argv[2])
    alphas = [float(a) for a in sys.argv[3:]] or [0.05, 0.1, 0.2]
    manifest, models = load(root)
    items = manifest["items"]
    n, k, m = len(items), manifest["k"], len(models)
    labels = [majority(it["votes"]) for it in items]
    finals = [[ly[-1, i] for _, ly in models] for i in range(n)]

    cols = {}
    human = [np.array(it["votes"], dtype=float) / sum(it["votes"]) for it in items]
    cols["H_dis"] = [1 - h.max() for h in human]
    cols["H_ent"] = [entropy(h) for h in human]
    shares = [np.bincount([int(np.argmax(p)) for p in finals[i]], minlength=k) / m for i in range(n)]
    cols["M_dis"] = [1 - s.max() for s in shares]
    cols["M_ent"] = [entropy(s) for s in shares]
    cols["M_avg_ent"] = [sum(entropy(p) for p in finals[i]) / m for i in range(n)]
    for a in alphas:
        col = []
        for i in range(n):
            if labels[i] is None:
                col.append(None)
                continue
            total = 0
            for j, (_, ly) in enumerate(models):
                scores = [ly[-1, t, labels[t]] for t in range(n) if t != i and labels[t] is not None]
                thr = cp_threshold(scores, a)
                p = ly[-1, i]
                total += k if thr is None else int((p >= thr).sum())
            col.append(total / m)
        cols[f"M_CP_{a:g}"] = col

    def ref(fn):
        return [None if labels[i] is None else fn(i, labels[i]) for i in range(n)]

    cols["M_fail"] = ref(lambda i, y: sum(int(np.argmax(p)) != y for p in finals[i]) / m)
    cols["M_1st_layer"] = ref(lambda i, y: sum(suffix([int(np.argmax(r)) for r in ly[:, i]], y) for _, ly in models) / m)
    cols["M_1st_ckpt"] = ref(lambda i, y: sum(suffix([int(np.argmax(r)) for r in ck[:, i]], y) for ck, _ in models) / m)
    cols["M_avg_ckpt"] = ref(lambda i, y: sum(np.mean([int(np.argmax(r)) != y for r in ck[:, i]]) for ck, _ in models) / m)
    cols["M_avg_ckpt_p"] = ref(lambda i, y: 1 - sum(ck[:, i, y].mean() for ck, _ in models) / m)

    with out.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["item_id", *cols])
        for i, it in enumerate(items):
            w.writerow([it["item_id"], *("" if c[i] is None else repr(float(c[i])) for c in cols.values())])


if __name__ == "__main__":
    main()
