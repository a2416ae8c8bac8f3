"""File round-trips for the JSON and CSV formats shared by the command line.

JSON documents mirror each type's to_dict layout; CSVs are flat tables meant
for diffing and external plotting.
"""

from __future__ import annotations

import json

import numpy as np

from .ambiguity import IntervalAmbiguity, KLAmbiguity
from .model import Kernel, ModelSpec
from .solver import Solution


def _coerce(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_coerce)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def save_model(model: ModelSpec, path) -> None:
    write_json(model.to_dict(), path)


def load_model(path) -> ModelSpec:
    return ModelSpec.from_dict(read_json(path))


def save_kernel(kernel: Kernel, path) -> None:
    write_json(kernel.to_dict(), path)


def load_kernel(path) -> Kernel:
    return Kernel.from_dict(read_json(path))


def save_kernel_csv(kernel: Kernel, path) -> None:
    """Long-form rows k,s,s_prime,p including structural zeros."""
    with open(path, "w") as fh:
        fh.write("k,s,s_prime,p\n")
        for k in range(kernel.k_max + 1):
            sl = kernel.slice(k)
            for s in range(sl.shape[0]):
                for sp in range(sl.shape[1]):
                    fh.write(f"{k},{s},{sp},{sl[s, sp]:.17g}\n")


def load_kernel_csv(path) -> Kernel:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().lower().replace(" ", "")
        if header != "k,s,s_prime,p":
            raise ValueError(f"unexpected kernel CSV header: {header!r}")
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"malformed row at line {ln}")
            rows.append((int(parts[0]), int(parts[1]), int(parts[2]),
                         float(parts[3])))
    if not rows:
        raise ValueError("empty kernel CSV")
    kk = max(r[0] for r in rows)
    ss = max(max(r[1] for r in rows), max(r[2] for r in rows))
    p = np.zeros((kk + 1, ss + 1, ss + 1))
    for k, s, sp, v in rows:
        p[k, s, sp] = v
    return Kernel(p)


def save_ambiguity(amb, path) -> None:
    write_json(amb.to_dict(), path)


def load_ambiguity(path):
    d = read_json(path)
    if "theta" in d:
        return KLAmbiguity.from_dict(d)
    if "lower" in d:
        return IntervalAmbiguity.from_dict(d)
    raise ValueError("ambiguity JSON must contain 'theta' or 'lower'")


def save_bootstrap(slices, seed, path) -> None:
    write_json({
        "num_samples": len(slices),
        "seed": seed,
        "kernels": [np.asarray(s).tolist() for s in slices],
    }, path)


def load_bootstrap(path):
    d = read_json(path)
    slices = [np.asarray(k, dtype=float) for k in d["kernels"]]
    if len(slices) != d.get("num_samples", len(slices)):
        raise ValueError("bootstrap sample count disagrees with its header")
    return slices, d.get("seed")


def save_solution(sol: Solution, path) -> None:
    write_json(sol.to_dict(), path)


def save_policy_csv(sol: Solution, path) -> None:
    """Flat rows k,s,V,action ordered by (k, s); action is the integer code."""
    with open(path, "w") as fh:
        fh.write("k,s,V,action\n")
        num_s, num_k = sol.values.shape
        for k in range(num_k):
            for s in range(num_s):
                fh.write(f"{k},{s},{sol.values[s, k]:.12g},"
                         f"{int(sol.policy[s, k])}\n")


def load_policy_csv(path):
    """Returns (values, policy) as (S+1, K+1) arrays."""
    entries = []
    with open(path) as fh:
        header = fh.readline().strip().lower().replace(" ", "")
        if header != "k,s,v,action":
            raise ValueError(f"unexpected policy CSV header: {header!r}")
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"malformed row at line {ln}")
            entries.append((int(parts[0]), int(parts[1]), float(parts[2]),
                            int(parts[3])))
    if not entries:
        raise ValueError("empty policy CSV")
    num_k = max(e[0] for e in entries) + 1
    num_s = max(e[1] for e in entries) + 1
    values = np.zeros((num_s, num_k))
    policy = np.zeros((num_s, num_k), dtype=np.int64)
    seen = np.zeros((num_s, num_k), dtype=bool)
    for k, s, v, a in entries:
        values[s, k] = v
        policy[s, k] = a
        seen[s, k] = True
    if not seen.all():
        raise ValueError("policy CSV is missing grid cells")
    return values, policy
