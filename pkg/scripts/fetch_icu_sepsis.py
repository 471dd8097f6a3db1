#!/usr/bin/env python3
"""Export the ICU-Sepsis benchmark tables into data/icu_sepsis/.

Best-effort: the `icu-sepsis` package publishes the MDP as dense
transition/reward arrays but has changed its layout across releases, so
this script probes several known attribute names and reports exactly
what it could and could not produce.  The downstream consumers only
need five files, and assembling them by hand (or from another source)
works just as well:

  transitions.csv   state,action,next_state,prob   (positive entries)
  initial.csv       state,prob                     (admission distribution)
  meta.csv          kind,id,name                   (action names, plus one
                                                    `survived` and one `died`
                                                    row marking terminals)
  obs.csv           state,<f1>,...,<f47>           (cluster centroids)
  rules.txt         label <name> := <feature> <op> <value|pNN>

The acceptance battery skips, with a report, while any of these are
missing.
"""

import csv
import sys
from pathlib import Path

import numpy as np

OUT_DIR = Path(__file__).resolve().parent.parent / "data" / "icu_sepsis"

RULES = """\
# Feature-based state labels used by the full-MDP property battery.
# high_* marks the top quartile of a severity feature, low_meanbp the
# bottom quartile of mean blood pressure.
label high_sofa := {sofa} >= p75
label high_lactate := {lactate} >= p75
label low_meanbp := {meanbp} <= p25
"""


def probe(obj, names):
    for name in names:
        value = getattr(obj, name, None)
        if value is not None:
            return np.asarray(value), name
    return None, None


def find_tables():
    """(P[s,a,s'], R, d0) from whatever the installed package exposes."""
    try:
        import icu_sepsis
    except ImportError as exc:
        raise SystemExit(
            f"cannot import icu_sepsis ({exc}); install it with "
            f"`pip install icu-sepsis` or place the five CSV files under "
            f"{OUT_DIR} by hand") from None

    candidates = [icu_sepsis]
    for sub in ("helpers", "data", "mdp", "env"):
        mod = getattr(icu_sepsis, sub, None)
        if mod is not None:
            candidates.append(mod)
    try:
        import gymnasium as gym
        for env_id in ("Sepsis/ICU-Sepsis-v2", "Sepsis/ICU-Sepsis-v1",
                       "ICU-Sepsis-v2", "ICU-Sepsis-v1"):
            try:
                env = gym.make(env_id)
            except Exception:
                continue
            candidates.append(env.unwrapped)
            break
    except ImportError:
        pass

    for obj in candidates:
        P, p_name = probe(obj, ("tx_mat", "transition_matrix", "P",
                                "transitions", "p_mat"))
        if P is None or P.ndim != 3:
            continue
        R, _ = probe(obj, ("r_mat", "reward_matrix", "R", "rewards"))
        d0, _ = probe(obj, ("d_0", "d0", "initial_state_dist",
                            "initial_distribution", "mu"))
        print(f"found tables on {obj!r} via attribute {p_name!r}")
        if P.shape[0] == P.shape[1] != P.shape[2]:
            P = np.moveaxis(P, 2, 1)  # (s, s', a) layout -> (s, a, s')
        return P, R, d0
    raise SystemExit(
        "icu_sepsis is importable but no transition tensor was found on "
        "any known attribute; export the tables manually (see module "
        "docstring for the file contract)")


def find_centroids(n_clinical):
    """Search the installed package for a cluster-centroid table."""
    import icu_sepsis
    root = Path(icu_sepsis.__file__).resolve().parent
    for path in sorted(root.rglob("*.csv")):
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError:
            continue
        if not rows or len(rows[0]) < 40:
            continue
        try:
            float(rows[0][-1])
            header, body = None, rows
        except ValueError:
            header, body = rows[0], rows[1:]
        if abs(len(body) - n_clinical) <= 2:
            print(f"using centroid table {path}")
            if header is None:
                header = [f"f{i}" for i in range(len(rows[0]))]
            return header, body
    return None, None


def main():
    P, R, d0 = find_tables()
    n, n_actions = P.shape[0], P.shape[1]
    print(f"tensor: {n} states, {n_actions} actions")

    # Terminal states are absorbing under every action; survival is the
    # one whose entry earns reward 1.
    absorbing = [s for s in range(n)
                 if all(P[s, a, s] == 1.0 for a in range(n_actions))]
    if len(absorbing) != 2:
        raise SystemExit(
            f"expected exactly 2 absorbing states (survived, died), "
            f"found {absorbing}")
    if R is None:
        raise SystemExit("no reward table found; cannot tell survived "
                         "from died")
    gains = [float(np.max(R[..., s])) if R.ndim == 3
             else float(np.max(R[s])) for s in absorbing]
    survived = absorbing[int(np.argmax(gains))]
    died = absorbing[1 - int(np.argmax(gains))]
    print(f"survived={survived} died={died}")

    if d0 is None:
        raise SystemExit("no initial distribution found")
    d0 = np.asarray(d0, dtype=float).ravel()

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    with open(OUT_DIR / "transitions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "action", "next_state", "prob"])
        for s in range(n):
            if s in (survived, died):
                continue
            for a in range(n_actions):
                for t in np.flatnonzero(P[s, a] > 0.0):
                    w.writerow([s, a, int(t), repr(float(P[s, a, t]))])
    with open(OUT_DIR / "initial.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "prob"])
        for s in np.flatnonzero(d0 > 0.0):
            w.writerow([int(s), repr(float(d0[s]))])
    with open(OUT_DIR / "meta.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "id", "name"])
        for a in range(n_actions):
            iv, vaso = divmod(a, 5)
            w.writerow(["action", a, f"iv{iv}_vaso{vaso}"])
        w.writerow(["survived", survived, ""])
        w.writerow(["died", died, ""])
    print(f"wrote transitions/initial/meta under {OUT_DIR}")

    header, body = find_centroids(n - 2)
    if header is None:
        print("WARNING: no 47-feature centroid table found in the "
              "package; obs.csv and rules.txt NOT written, the "
              "label-dependent properties will be skipped")
        return 1
    names = [h.strip() for h in header[1:]] if header[0].lower() in \
        ("state", "cluster", "id") else [h.strip() for h in header]
    with open(OUT_DIR / "obs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state"] + names)
        for i, row in enumerate(body):
            values = row[1:] if len(row) == len(names) + 1 else row
            w.writerow([i] + list(values))

    def match(fragment):
        hits = [nm for nm in names if fragment in nm.lower()]
        return hits[0] if hits else None

    sofa = match("sofa")
    lactate = match("lactate")
    meanbp = match("meanbp") or match("mean_bp") or match("mbp")
    if not all((sofa, lactate, meanbp)):
        print(f"WARNING: could not identify label features "
              f"(sofa={sofa}, lactate={lactate}, meanbp={meanbp}); "
              f"rules.txt NOT written")
        return 1
    (OUT_DIR / "rules.txt").write_text(
        RULES.format(sofa=sofa, lactate=lactate, meanbp=meanbp))
    print("wrote obs.csv and rules.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
