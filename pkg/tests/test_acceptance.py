"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from pseudocircle.annuli import horizontal_curve, pullback_curve, trace_chain, trace_curve
from pseudocircle.cli import run
from pseudocircle.crooked import count_reversals, has_wiggle, is_crooked, reversal_locations
from pseudocircle.maps import TWO_PI, BlockSchedule, CylinderPoint, MapId, WParams, apply_W, forward_xy
from pseudocircle.symbolic import (
    Escaped,
    SkewState,
    code_to_interval,
    covering_check,
    escape_grid,
    escape_times,
    g_itinerary,
    orbit,
    transitivity_witness,
    witness_visits,
)

from oracles import all_codes, brute_is_crooked, exact_itinerary, fast_brute_has_wiggle

PI = math.pi


def _search_argv(out):
    return ["search", "--depth", "2", "--N", "4", "6", "--M", "512", "--out", str(out)]


@pytest.fixture(scope="module")
def search_runs(tmp_path_factory):
    docs = []
    for tag, threads in (("a", None), ("b", "1")):
        out = tmp_path_factory.mktemp(f"search_{tag}")
        old = os.environ.get("CROOKED_THREADS")
        if threads:
            os.environ["CROOKED_THREADS"] = threads
        t0 = time.perf_counter()
        try:
            code = run(_search_argv(out))
        finally:
            if threads:
                if old is None:
                    del os.environ["CROOKED_THREADS"]
                else:
                    os.environ["CROOKED_THREADS"] = old
        elapsed = time.perf_counter() - t0
        files = sorted(out.glob("search_*.json"))
        docs.append((code, files, elapsed))
    return docs


@pytest.mark.criterion(1)
def test_fixed_points(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for M in (512, 1024, 4096):
        for x, y in ((PI / 2, 1.0), ((-PI / 2) % TWO_PI, -1.0)):
            q = apply_W(CylinderPoint.of(x, y), WParams(M))
            dx = abs(q.x - x) % TWO_PI
            worst = max(worst, min(dx, TWO_PI - dx), abs(q.y - y))
    dt = time.perf_counter() - t0
    assert criterion(worst <= 1e-12 and dt < 1, f"max error {worst:.1e}, {dt:.3f} s")


@pytest.mark.criterion(2)
def test_nesting(criterion):
    t0 = time.perf_counter()
    tch = trace_chain(BlockSchedule.of([(1, 0)]), 1)
    t_ok = (np.allclose(tch[1].upper.y, 0.25, atol=1e-15)
            and np.allclose(tch[1].lower.y, -0.25, atol=1e-15))
    s = BlockSchedule.of([(0, 1)])
    wch = trace_chain(s, 1)
    err, inside = 0.0, True
    for c in (wch[1].upper, wch[1].lower):
        _, fy = forward_xy(c.x, c.y, s, 1)
        err = max(err, float(np.max(np.abs(np.abs(fy) - 2))))
        inside &= bool(np.all(np.abs(c.y) < 2))
    dt = time.perf_counter() - t0
    ok = t_ok and inside and err <= 1e-6 and dt < 10
    assert criterion(ok, f"T strip exact={t_ok}, W boundary |y|<2={inside}, "
                         f"forward error {err:.1e}, {dt:.2f} s")


@pytest.mark.criterion(3)
def test_reversal_localization(criterion):
    t0 = time.perf_counter()
    dists, counts = [], []
    for M in (512, 1024, 2048):
        c = pullback_curve(horizontal_curve(0.0), MapId.W, WParams(M))
        revs = reversal_locations(c)
        counts.append(len(revs))
        if len(revs) == 2:
            dists.append((abs(revs[0].param - PI / 2), abs(revs[1].param - 1.5 * PI)))
    dt = time.perf_counter() - t0
    ok = counts == [2, 2, 2] and dt < 10
    ok = ok and all(d < 0.2 for d in dists[0])
    ok = ok and all(dists[i + 1][k] < dists[i][k] for i in range(2) for k in range(2))
    detail = ", ".join(f"({a:.6f}, {b:.6f})" for a, b in dists)
    assert criterion(ok, f"counts {counts}, distances {detail}, {dt:.2f} s")


@pytest.mark.criterion(4)
def test_doubling(criterion):
    t0 = time.perf_counter()
    curves = {0: horizontal_curve(0.0),
              2: trace_curve(0.0, [MapId.W], WParams(), 1e-3),
              4: trace_curve(0.0, [MapId.W, MapId.T], WParams(), 1e-3)}
    rows, ok = [], True
    for r, c in curves.items():
        d = pullback_curve(c, MapId.T)
        got = (count_reversals(c), count_reversals(d))
        halved = math.isclose(d.holonomy, c.holonomy / 2, rel_tol=1e-15)
        ok &= got == (r, 2 * r) and halved
        rows.append(f"{got[0]}->{got[1]}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 30
    assert criterion(ok, f"reversals per circuit {', '.join(rows)}, holonomy halved, {dt:.2f} s")


@pytest.mark.criterion(5)
def test_wiggle_oracle(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    queries = disagreements = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 61))
        seq = (int(rng.integers(-5, 6)) + np.concatenate([[0], np.cumsum(rng.choice([-1, 1], n - 1))])).tolist()
        lo, hi = min(seq), max(seq)
        for j0 in range(lo - 1, hi + 2):
            for j1 in range(j0 + 3, hi + 2):
                queries += 1
                if has_wiggle(seq, j0, j1) != fast_brute_has_wiggle(seq, j0, j1):
                    disagreements += 1
    dt = time.perf_counter() - t0
    assert criterion(disagreements == 0 and dt < 60,
                     f"{queries} queries, {disagreements} disagreements, {dt:.1f} s")


@pytest.mark.criterion(6)
def test_crooked_witness(criterion, search_runs):
    code, files, elapsed = search_runs[0]
    ok = code == 0 and len(files) == 1
    detail = f"exit {code}"
    if ok:
        doc = json.loads(files[0].read_text(encoding="utf-8"))
        its = [r["itinerary"] for r in doc["recheck"]]
        rechecked = all(is_crooked(it) and brute_is_crooked(it) for it in its)
        spans = [max(it) - min(it) for it in its]
        diam = doc["max_rect_diameter"]
        decreasing = all(b < a for a, b in zip(diam, diam[1:]))
        ok = (doc["recheck_passed"] and rechecked and len(doc["blocks"]) >= 2
              and decreasing and elapsed < 1800)
        detail = (f"blocks {doc['schedule']}, spans {spans}, re-verified {rechecked}, "
                  f"diameters {' > '.join(f'{d:.4f}' for d in diam)}, {elapsed:.1f} s")
    assert criterion(ok, detail)


@pytest.mark.criterion(7)
def test_covering(criterion):
    t0 = time.perf_counter()
    rep = covering_check()
    ok = all(rep[k]["covers"] == {1: True, 2: True} and rep[k]["injective"] for k in (1, 2))
    dt = time.perf_counter() - t0
    assert criterion(ok and dt < 1, f"g(I1) = [0, 3π/2], g(I2) = [3π, 9π/2], {dt * 1e3:.1f} ms")


@pytest.mark.criterion(8)
def test_coding(criterion):
    t0 = time.perf_counter()
    bad = 0
    width_err = 0.0
    target = (PI / 2) * 3.0 ** -11
    for code in all_codes(12):
        iv = code_to_interval(code)
        if exact_itinerary(iv.mid, 12) != code or g_itinerary(iv.mid, 12) != code:
            bad += 1
        if iv.hi - iv.lo != Fraction(1, 2) / 3 ** 11:
            bad += 1
        width_err = max(width_err, abs(iv.width - target))
    dt = time.perf_counter() - t0
    ok = bad == 0 and width_err <= 1e-12 and dt < 10
    assert criterion(ok, f"4096 codes, {bad} mismatches, width error {width_err:.1e}, {dt:.2f} s")


@pytest.mark.criterion(9)
def test_escape_census(criterion):
    t0 = time.perf_counter()
    maxiter = 1000
    X, Y, Z = escape_grid(50, 50, 40)
    steps = escape_times(X, Y, Z, WParams(), maxiter)
    never = np.flatnonzero(steps < 0)
    never_ok = True
    for i in never:
        traj = orbit(SkewState(X[i], Y[i], Z[i]), steps=maxiter)
        never_ok &= all(abs(s.y) <= 2 for s in traj)
    # z-itinerary escapes force a finite escape step no later than the z escape
    zs = np.unique(Z)
    z_escape = {z: g_itinerary(z, maxiter + 1) for z in zs}
    consistent = True
    for z, it in z_escape.items():
        if isinstance(it, Escaped):
            sel = Z == z
            consistent &= bool(np.all((steps[sel] >= 0) & (steps[sel] <= it.step)))
    # the fixed states of F stay forever; a nonvacuous check of the NEVER branch
    fixed = escape_times([PI / 2, 0.0], [1.0, 0.0], [PI, 0.0], WParams(), maxiter)
    dt = time.perf_counter() - t0
    ok = never_ok and consistent and bool(np.all(fixed < 0)) and dt < 300
    assert criterion(ok, f"{len(X)} points, {len(never)} NEVER, {int((steps >= 0).sum())} escaped, "
                         f"z-escape consistency {consistent}, fixed states NEVER, {dt:.1f} s")


@pytest.mark.criterion(10)
def test_transitivity_witness(criterion):
    t0 = time.perf_counter()
    code = transitivity_witness(6)
    visited = witness_visits(code, 6)
    dt = time.perf_counter() - t0
    assert criterion(len(visited) == 64 and dt < 1,
                     f"witness length {len(code)}, {len(visited)}/64 cylinders, {dt * 1e3:.1f} ms")


@pytest.mark.criterion(11)
def test_determinism(criterion, search_runs):
    (ca, fa, _), (cb, fb, _) = search_runs
    same = (ca == cb == 0 and len(fa) == len(fb) == 1 and fa[0].name == fb[0].name
            and fa[0].read_bytes() == fb[0].read_bytes())
    assert criterion(same, f"{fa[0].name if fa else '-'} byte-identical across runs "
                           f"(second run single-threaded)")
