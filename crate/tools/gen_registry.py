#!/usr/bin/env python3
"""Generate the r-to-1 bilocal-Clifford purification registry.

For Werner inputs, an r-to-1 bilocal Clifford protocol that post-selects on
trivial parities is characterised by an [[r,1]] stabilizer group S: the round
succeeds when the Pauli error pattern lies in the normalizer N(S), and the
output is the ideal Bell pair when it lies in S. With per-copy error weights
F (identity) and (1-F)/3 (each of X, Y, Z):

    g(F) = sum_t B_t F^(r-t) ((1-F)/3)^t          (normalizer enumerator)
    N(F) = sum_t A_t F^(r-t) ((1-F)/3)^t          (stabilizer enumerator)
    F'   = N / g

with B obtained from A by the quantum MacWilliams identity. r = 2 with
S = <ZZ> reproduces BBPSSW.

Every [[r,1]] stabilizer group is, up to local Cliffords (which preserve
Pauli weight), an index-2 subgroup of a graph-state stabilizer group, so the
enumerator classes are collected by walking all graphs on r vertices
(networkx graph atlas, r <= 7) and all nonzero linear functionals on the
graph-state generators. Classes dominated pointwise in both f and g over the
entangled domain are dropped; they can never lower a copy budget.

Usage: gen_registry.py [--rmin 3] [--rmax 7] [--out data/jansen.json]
"""
import argparse
import json
from fractions import Fraction
from itertools import combinations

import networkx as nx


def graph_group_weights(g, n):
    """Weight of every element of the graph-state stabilizer group, indexed by subset mask."""
    nbr = [0] * n
    for u, v in g.edges():
        nbr[u] |= 1 << v
        nbr[v] |= 1 << u
    weights = []
    for s in range(1 << n):
        z = 0
        for v in range(n):
            if s >> v & 1:
                z ^= nbr[v]
        weights.append(bin(s | z).count("1"))
    return weights


def macwilliams(a, n, k=1):
    """Normalizer enumerator from stabilizer enumerator: B(x,y) = A(x+3y, x-y) / 2^(n-k)."""
    # expand sum_t a_t (x+3y)^(n-t) (x-y)^t, collect coefficient of x^(n-j) y^j
    from math import comb
    b = [Fraction(0)] * (n + 1)
    for t, at in enumerate(a):
        if at == 0:
            continue
        for i in range(n - t + 1):          # y-power from (x+3y)^(n-t)
            for j in range(t + 1):          # y-power from (x-y)^t
                b[i + j] += at * comb(n - t, i) * 3 ** i * comb(t, j) * (-1) ** j
    scale = 2 ** (n - k)
    out = [x / scale for x in b]
    assert all(x.denominator == 1 and x >= 0 for x in out), out
    return [int(x) for x in out]


def enumerators(n):
    classes = set()
    for g in nx.graph_atlas_g():
        if g.number_of_nodes() != n:
            continue
        w = graph_group_weights(g, n)
        for c in range(1, 1 << n):
            a = [0] * (n + 1)
            for s in range(1 << n):
                if bin(s & c).count("1") % 2 == 0:
                    a[w[s]] += 1
            classes.add(tuple(a))
    return sorted(classes)


def poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        for j, y in enumerate(q):
            out[i + j] += x * y
    return out


def poly_pow(p, e):
    out = [Fraction(1)]
    for _ in range(e):
        out = poly_mul(out, p)
    return out


def enumerator_in_w(coeffs, n):
    """sum_t c_t F^(n-t) b^t with F = (1+3w)/4, b = (1-w)/4, as ascending polynomial in w."""
    fid = [Fraction(1, 4), Fraction(3, 4)]
    err = [Fraction(1, 4), Fraction(-1, 4)]
    total = [Fraction(0)] * (n + 1)
    for t, c in enumerate(coeffs):
        if c == 0:
            continue
        term = poly_mul(poly_pow(fid, n - t), poly_pow(err, t))
        for i, x in enumerate(term):
            total[i] += c * x
    return total


def evaluate(p, w):
    return sum(float(c) * w ** i for i, c in enumerate(p))


def maps(a, n):
    b = macwilliams(a, n)
    num = enumerator_in_w(a, n)
    g = enumerator_in_w(b, n)
    # w' = (4 F' - 1) / 3 = (4 N - g) / (3 g)
    f_num = [(4 * x - y) / 3 for x, y in zip(num, g)]
    return b, f_num, g


def nondominated(entries, grid):
    vals = []
    for e in entries:
        vals.append([(evaluate(e["f_num"], w) / evaluate(e["g"], w), evaluate(e["g"], w)) for w in grid])
    keep = []
    tol = 1e-12
    for i, vi in enumerate(vals):
        dominated = False
        for j, vj in enumerate(vals):
            if i == j:
                continue
            ge = all(fj >= fi - tol and gj >= gi - tol for (fi, gi), (fj, gj) in zip(vi, vj))
            strict = any(fj > fi + tol or gj > gi + tol for (fi, gi), (fj, gj) in zip(vi, vj))
            if ge and (strict or j < i):
                dominated = True
                break
        if not dominated:
            keep.append(entries[i])
    return keep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rmin", type=int, default=3)
    ap.add_argument("--rmax", type=int, default=7)
    ap.add_argument("--all", action="store_true", help="keep dominated classes too")
    ap.add_argument("--out", default="data/jansen.json")
    args = ap.parse_args()

    grid = [1 / 3 + i * (2 / 3) / 400 for i in range(1, 401)]
    protocols = []
    for n in range(args.rmin, args.rmax + 1):
        entries = []
        for a in enumerators(n):
            b, f_num, g = maps(a, n)
            entries.append({"a": a, "b": b, "f_num": f_num, "g": g})
        kept = entries if args.all else nondominated(entries, grid)
        print(f"r={n}: {len(entries)} enumerator classes, {len(kept)} kept")
        for e in kept:
            protocols.append({
                "family": "jansen",
                "name": f"jansen-r{n}-S{''.join(map(str, e['a']))}",
                "r": n,
                "variable": "werner",
                "f_num": [float(x) for x in e["f_num"]],
                "f_den": [float(x) for x in e["g"]],
                "g_num": [float(x) for x in e["g"]],
                "g_den": [1.0],
                "domain": [1 / 3, 1.0],
            })
    with open(args.out, "w") as fh:
        json.dump({"protocols": protocols}, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
