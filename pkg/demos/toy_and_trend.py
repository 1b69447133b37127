"""Simulating the code ensemble: an exact toy, then a realistic sweep.

First a two-symbol system small enough to enumerate exactly, to show the
simulator hitting the true error probability.  Then Gaussian source over
AWGN at n = 32 with subcodebooks of up to ~10^20 codewords, which the
extremal sampler handles without materialising them, set against the
normal-approximation prediction.
"""

import sys
from pathlib import Path

from nnjscc import analytic as an
from nnjscc.ensemble import xi_second_order
from nnjscc.model import SystemConfig, make_noise, make_source
from nnjscc.montecarlo import estimate_pe, prepare_scheme

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from toy_oracle import TOY_PE, toy_scheme  # noqa: E402

s = estimate_pe(toy_scheme(), 200000, master_seed=1)
print(f"toy: exact p_e {TOY_PE:.5f}, simulated {s.p_e_hat:.5f}, 95% CI ({s.wilson_ci[0]:.5f}, {s.wilson_ci[1]:.5f})")
print("     categories", s.counts)

rep = an.dispersion_report(3.0, 1.0, 3.0, 3.0, 0.5)
n = 32
print(f"\nGaussian over AWGN, P = 3, D = 0.5, n = {n}; first-order k = {n * rep.rho_star:.1f}")
print(f"{'k':>4} {'log10 max M':>12} {'p_e_hat':>8} {'predicted':>10}")
src, noise = make_source("gaussian", {"sigma2": 1.0}), make_noise("gaussian")
for k in (36, 44, 52, 60, 68, 76):
    scheme = prepare_scheme(SystemConfig(P=3.0, D=0.5, k=k, n=n, sigma2=1.0), src, noise,
                            xi_second_order(k), sampler="extremal", block_size=2000)
    r = estimate_pe(scheme, 10000, master_seed=2)
    print(f"{k:4d} {max(scheme.log_M) / 2.302585:12.1f} {r.p_e_hat:8.3f} {an.predicted_eps(n, k, rep):10.3f}")
print("the simulated curve sits well left of the prediction: at n = 32 the neglected"
      " log k terms cost roughly 20 source symbols")
