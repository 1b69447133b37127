"""The probability that one random codeword covers a given source vector.

For a source vector of per-symbol power p, a codeword drawn uniformly on the
sphere of radius sqrt(k (sigma2 - D)) lands within distortion D with
probability psi_sp(k, p).  The table compares it with its two closed-form
bounds and with the same probability for i.i.d. Gaussian codewords, and
shows how the per-symbol exponent approaches its limit.
"""

from nnjscc import nonexcess as nx

ctx = nx.PsiContext(1.0, 0.25)
print(f"covering annulus for sigma2 = 1, D = 0.25: ({ctx.r1sq:.4f}, {ctx.r2sq:.4f})\n")

print(f"{'k':>4} {'p':>5} {'lower':>11} {'psi_sp':>11} {'upper':>11} {'psi_iid':>11}")
for k in (8, 32, 128):
    for p in (0.7, 1.0, 1.3):
        print(f"{k:4d} {p:5.2f} {nx.psi_sp_lower(k, p, ctx):11.4e} {nx.psi_sp(k, p, ctx):11.4e} "
              f"{nx.psi_sp_upper(k, p, ctx):11.4e} {nx.psi_iid(k, p, ctx):11.4e}")

print("\n-log(psi)/k against its limit at p = sigma2 (both tend to R(D) = ln 2 = 0.6931)")
for k in (16, 64, 256, 1024):
    sp = -nx.log_psi("spherical", k, 1.0, ctx) / k
    iid = -nx.log_psi("iid", k, 1.0, ctx) / k
    print(f"  k = {k:5d}: spherical {sp:.4f} (r_sp {nx.r_sp(1.0, ctx):.4f}), "
          f"iid {iid:.4f} (r_iid {nx.r_iid(1.0, ctx):.4f})")
