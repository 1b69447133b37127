"""Acceptance criteria 1 to 11, each at its stated tolerance.

Every test records one PASS/FAIL line, printed immediately and repeated in
the terminal summary so that ``pytest -v`` shows them without ``-s``.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from nnjscc import analytic as an
from nnjscc import codec
from nnjscc import nonexcess as nx
from nnjscc.ensemble import CodeEnsemble, TypePartition, xi_second_order
from nnjscc.model import SystemConfig, make_noise, make_source
from nnjscc.montecarlo import (
    block_rng,
    conditional_decoder_errors,
    estimate_pe,
    prepare_scheme,
    rcu_bounds,
    wilson_interval,
)
from toy_oracle import TOY_PE, toy_scheme

RESULTS = []


def record(name, ok, detail, started):
    line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail}; {time.perf_counter() - started:.1f} s)"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_c01_gaussian_specialisations():
    t0 = time.perf_counter()
    worst = 0.0
    for sigma2 in (0.5, 1.0, 4.0):
        worst = max(worst, abs(an.v_source(3 * sigma2**2, sigma2) - 0.5) / 0.5)
    for P in (0.5, 1.0, 3.0, 10.0):
        exact = P * (P + 2) / (2 * (P + 1) ** 2)
        worst = max(worst, abs(an.v_channel(3.0, P, "spherical") - exact) / exact)
    record("C1 Gaussian dispersions", worst <= 1e-12, f"max rel err {worst:.2e}", t0)


def test_c02_iid_minus_spherical_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for zeta, P in zip(rng.uniform(1.0, 10.0, 100), np.exp(rng.uniform(-4, 4, 100))):
        gap = an.v_channel(zeta, P, "iid") - an.v_channel(zeta, P, "spherical")
        exact = 0.5 * (P / (P + 1)) ** 2
        worst = max(worst, abs(gap - exact) / exact)
    record("C2 channel dispersion gap", worst <= 1e-12, f"max rel err {worst:.2e}", t0)


def _mc_psi_iid(k, p, ctx, samples, rng):
    # ||s - X||^2 / (sigma2 - D) is noncentral chi-square with k degrees of freedom
    c = ctx.sigma2 - ctx.D
    hits = 0
    for _ in range(samples // 10**6):
        w = rng.noncentral_chisquare(k, k * p / c, 10**6)
        hits += int(np.count_nonzero(w * c <= k * ctx.D))
    return hits


def _mc_psi_sp(k, p, ctx, samples, rng):
    # first coordinate of a uniform point on the sphere: g1 / sqrt(g1^2 + chi2_{k-1})
    c = ctx.sigma2 - ctx.D
    hits = 0
    for _ in range(samples // 10**6):
        g1 = rng.standard_normal(10**6)
        rest = rng.chisquare(k - 1, 10**6)
        cosine = g1 / np.sqrt(g1 * g1 + rest)
        dist = k * p + k * c - 2 * k * math.sqrt(p * c) * cosine
        hits += int(np.count_nonzero(dist <= k * ctx.D))
    return hits


def test_c03_psi_monte_carlo_oracles():
    t0 = time.perf_counter()
    ctx = nx.PsiContext(1.0, 0.25)
    rng = np.random.default_rng(3)
    samples = 10**7
    worst = 0.0
    for k in (2, 8, 32):
        for p in (0.7, 1.0, 1.3):
            for fn, mc in ((nx.psi_iid, _mc_psi_iid), (nx.psi_sp, _mc_psi_sp)):
                exact = fn(k, p, ctx)
                est = mc(k, p, ctx, samples, rng) / samples
                se = math.sqrt(exact * (1 - exact) / samples)
                z = abs(est - exact) / se if se > 0 else (0.0 if est == exact else math.inf)
                worst = max(worst, z)
    record("C3 covering probability oracles", worst <= 4.0, f"max |z| {worst:.2f} over 18 cases", t0)


def test_c04_sandwich():
    t0 = time.perf_counter()
    ctx = nx.PsiContext(1.0, 0.25)
    grid = np.linspace(ctx.r1sq, ctx.r2sq, 52)[1:-1]
    violations = checked = 0
    for k in (8, 16, 64, 256):
        for p in grid:
            # the upper bound needs the cap half-angle below pi/2
            if p + ctx.sigma2 - 2 * ctx.D < 0:
                continue
            checked += 1
            lo, mid, hi = nx.psi_sp_lower(k, p, ctx), nx.psi_sp(k, p, ctx), nx.psi_sp_upper(k, p, ctx)
            violations += not lo <= mid <= hi
    record("C4 covering sandwich", violations == 0 and checked == 200,
           f"{violations} violations in {checked} points", t0)


def test_c05_taylor_residual_contraction():
    t0 = time.perf_counter()
    ctx = nx.PsiContext(1.0, 0.25)
    R = an.rate_distortion(1.0, 0.25)
    ratios = []
    for fn in (nx.r_sp, nx.r_iid):
        res = [fn(1.0 + h, ctx) - R - h / 2 for h in (1e-2, 5e-3, 2.5e-3)]
        ratios += [res[0] / res[1], res[1] / res[2]]
    ok = all(3.2 <= r <= 4.8 for r in ratios)
    record("C5 Taylor residual", ok, "ratios " + ", ".join(f"{r:.3f}" for r in ratios), t0)


def _random_instance(rng):
    N = int(rng.integers(1, 5))
    M = tuple(int(m) for m in rng.integers(1, 17, N))
    n = int(rng.integers(1, 33))
    P = float(np.exp(rng.uniform(-2, 3)))
    ch = rng.standard_normal((sum(M), n)) * math.sqrt(P)
    mode = rng.integers(0, 4)
    y = ch[rng.integers(sum(M))] + rng.standard_normal(n) * rng.uniform(0, 2)
    if mode == 1:
        # duplicate codewords inside one subcodebook
        a = int(rng.integers(sum(M)))
        o = np.concatenate([[0], np.cumsum(M)])
        t = int(np.searchsorted(o, a, side="right")) - 1
        ch[o[t]:o[t + 1]] = ch[a]
        y = ch[a] + rng.standard_normal(n) * 0.3
    elif mode == 2 and N > 1:
        # equal sizes and identical codewords across two types
        M = (M[0],) * N
        ch = np.tile(rng.standard_normal((M[0], n)) * math.sqrt(P), (N, 1))
        y = ch[rng.integers(M[0])]
    elif mode == 3:
        # integer lattice codewords and output: many exactly equal distances
        ch = rng.integers(-2, 3, (sum(M), n)).astype(float)
        y = rng.integers(-2, 3, n).astype(float)
    # the decoder never looks at the source side, so a placeholder partition suffices
    part = TypePartition(2, 0.25, 1.0, N, np.linspace(0.5, 1.5, N + 1))
    ens = CodeEnsemble(part, M, "spherical", "spherical", np.zeros((sum(M), 2)), ch)
    return ens, y, P


def test_c06_decoder_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    agree = ties = 0
    instances = 10**4
    for _ in range(instances):
        ens, y, P = _random_instance(rng)
        a = codec.decode(y, ens)
        b = codec.decode_via_density(y, ens, P)
        score = codec.sq_distances(ens.ch, y) + ens.penalties()
        ties += int(np.count_nonzero(score == score.min()) > 1)
        agree += (a.type_index, a.codeword_index) == (b.type_index, b.codeword_index)
    record("C6 decoder equivalence", agree == instances,
           f"{agree}/{instances} agree, {ties} instances with exact ties", t0)


def test_c07_toy_enumeration_oracle():
    t0 = time.perf_counter()
    scheme = toy_scheme(block_size=25000)
    trials = 10**5
    inside = 0
    for seed in range(100):
        s = estimate_pe(scheme, trials, master_seed=seed)
        lo, hi = s.wilson_ci
        inside += lo <= TOY_PE <= hi
    record("C7 toy enumeration", inside >= 93, f"exact p_e {TOY_PE}; {inside}/100 Wilson CIs cover it", t0)


def _bounds_scheme(law):
    system = SystemConfig(P=1.0, D=0.5, k=4, n=8, sigma2=1.0, src_codebook=law, ch_codebook=law)
    return prepare_scheme(system, make_source("gaussian", {"sigma2": 1.0}), make_noise("gaussian"), 0.25, M=[4, 8])


def test_c08_decoder_bounds_consistency():
    t0 = time.perf_counter()
    scheme = _bounds_scheme("spherical")
    # each comparison involves two intervals; 97.5% each keeps the pair at joint 95%
    level = 0.975
    bad = []
    for seed in range(10):
        for i in (1, 2):
            rng = block_rng(seed, i)
            upper, lower = rcu_bounds(scheme, i, 20000, rng)
            trials = 50000
            errors = conditional_decoder_errors(scheme, i, trials, rng)
            w_lo, w_hi = wilson_interval(errors, trials, level)
            if upper.ci(level)[1] < w_lo:
                bad.append(f"upper seed {seed} type {i}")
            if lower.ci(level)[0] > w_hi:
                bad.append(f"lower seed {seed} type {i}")
    record("C8 decoder bounds vs simulation", not bad, f"{len(bad)} of 40 comparisons inconsistent", t0)


def _c9_scheme(k):
    system = SystemConfig(P=3.0, D=0.5, k=k, n=32, sigma2=1.0)
    return prepare_scheme(system, make_source("gaussian", {"sigma2": 1.0}), make_noise("gaussian"),
                          xi_second_order(k), xi_rule=xi_second_order, sampler="extremal", block_size=2000)


C9_TRIALS = 20000
C9_SEED = 9


def test_c09_second_order_trend():
    t0 = time.perf_counter()
    rep = an.dispersion_report(3.0, 1.0, 3.0, 3.0, 0.5)
    targets = {eps: round(an.second_order_k(32, eps, rep)) for eps in (0.2, 0.5, 0.8)}
    ks = sorted({k0 + d for k0 in targets.values() for d in (-3, -1, 1, 3)})
    pe, ci = {}, {}
    for k in ks:
        s = estimate_pe(_c9_scheme(k), C9_TRIALS, C9_SEED)
        pe[k], ci[k] = s.p_e_hat, s.wilson_ci
    # monotone across every pair of points whose CIs are disjoint
    separated = [(a, b) for a in ks for b in ks if a < b and ci[a][1] < ci[b][0] or
                 a < b and ci[b][1] < ci[a][0]]
    order_ok = all(pe[a] < pe[b] for a, b in separated)
    rho = spearmanr(ks, [pe[k] for k in ks])[0]
    bracket = {eps: pe[k0 - 3] <= eps <= pe[k0 + 3] for eps, k0 in targets.items()}
    detail = (f"predicted k {targets}; p_e_hat " + ", ".join(f"{k}:{pe[k]:.3f}" for k in ks)
              + f"; spearman {rho:.3f}; brackets {bracket}")
    record("C9 second-order trend", order_ok and all(bracket.values()), detail, t0)


def _c10_reports():
    rng = np.random.default_rng(10)
    out = []
    while len(out) < 50:
        sigma2 = float(np.exp(rng.uniform(-1, 1)))
        zeta_s = sigma2**2 * float(rng.uniform(1.2, 6.0))
        zeta_c = float(rng.uniform(1.2, 6.0))
        P = float(np.exp(rng.uniform(-2, 3)))
        D = sigma2 * float(rng.uniform(0.05, 0.95))
        rep = an.dispersion_report(zeta_s, sigma2, zeta_c, P, D)
        if rep.v_s > 0 and rep.v_c_sp > 0:
            out.append(rep)
    return out


def test_c10a_separate_second_order_is_worse():
    t0 = time.perf_counter()
    q = an.qfunc_inv(0.1)
    fails = sum(not an.separate_second_order(0.1, r) > math.sqrt(r.v_joint_sp) * q for r in _c10_reports())
    record("C10a separate second-order backoff", fails == 0, f"{fails}/50 tuples violate the strict gap", t0)


def test_c10b_separate_md_constant_is_smaller():
    t0 = time.perf_counter()
    fails = sum(not an.separate_md(r) < an.md_constant(r) for r in _c10_reports())
    record("C10b separate moderate-deviations constant", fails == 0,
           f"{fails}/50 tuples violate separate_md < md_constant", t0)


def test_c11_determinism_across_workers():
    t0 = time.perf_counter()
    toy = toy_scheme(block_size=25000)
    a = estimate_pe(toy, 10**5, 0, workers=1).to_json()
    b = estimate_pe(toy, 10**5, 0, workers=8).to_json()
    rep = an.dispersion_report(3.0, 1.0, 3.0, 3.0, 0.5)
    k = round(an.second_order_k(32, 0.5, rep))
    c = estimate_pe(_c9_scheme(k), C9_TRIALS, C9_SEED, workers=1).to_json()
    d = estimate_pe(_c9_scheme(k), C9_TRIALS, C9_SEED, workers=8).to_json()
    record("C11 determinism", a == b and c == d, f"toy identical {a == b}, trend point identical {c == d}", t0)
