#!/usr/bin/env python3
"""Grid search over the l1 weight, maximizing the SNR of the converged
single-level solution on the desk-scale degradation cases.

Usage: python scripts/tune_lambda.py [--size 256] [--iters 1500]
"""

import argparse
import sys

import numpy as np

import mlprox as mp

CASES = {
    "1a": dict(psf_support=11, psf_sigma=2.0, noise_sigma=0.01),
    "1b": dict(psf_support=21, psf_sigma=4.0, noise_sigma=0.01),
    "2a": dict(psf_support=11, psf_sigma=2.0, noise_sigma=0.04),
    "2b": dict(psf_support=21, psf_sigma=4.0, noise_sigma=0.04),
}


def snr_for(case: dict, lam: float, size: int, iters: int, basis) -> float:
    x_true = mp.synthetic_scene(size, seed=7)
    spec = mp.DegradationSpec(case["psf_support"], case["psf_sigma"],
                              case["noise_sigma"], seed=123)
    blur = spec.make_blur((size, size))
    z = mp.degrade(x_true, spec, blur)
    prior = mp.L1SynthesisPrior(basis, int(np.log2(size)), lam)
    lip = mp.power_method_norm(blur, seed=0).value
    obj = mp.CompositeObjective(blur, z, prior, gamma=1.0, lipschitz_f=lip)
    x0 = mp.wiener_init(z, blur, 1e-2).x
    x, _ = mp.fista_run(obj, x0, mp.MomentumSchedule(), mp.default_tau(obj),
                        mp.StopRule(0.0, iters))
    return mp.snr_db(x_true, x), mp.snr_db(x_true, z)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--iters", type=int, default=1500)
    ap.add_argument("--wavelet", default="sym4")
    ap.add_argument("--cases", nargs="*", default=list(CASES))
    ap.add_argument("--grid", nargs="*", type=float,
                    default=[3e-5, 1e-4, 2e-4, 4e-4, 8e-4, 1.6e-3, 3.2e-3])
    args = ap.parse_args(argv)

    basis = mp.WaveletBasis.from_name(args.wavelet)
    for name in args.cases:
        case = CASES[name]
        best = None
        print(f"case {name}: {case}")
        for lam in args.grid:
            snr, snr_z = snr_for(case, lam, args.size, args.iters, basis)
            gain = snr - snr_z
            print(f"  lambda={lam:8.2e}  SNR={snr:6.2f} dB  (z={snr_z:.2f}, "
                  f"gain={gain:+.2f})")
            if best is None or snr > best[1]:
                best = (lam, snr)
        print(f"  -> best lambda for {name}: {best[0]:.2e} (SNR {best[1]:.2f})\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
