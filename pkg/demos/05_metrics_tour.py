"""The metric suite on sequences whose right answers are easy to reason about.

PSNR/SSIM need a reference; warp error and MABD do not — they measure
temporal stability directly on the output.  Writes a CSV report under
demos/out/05/.
"""

from pathlib import Path

import numpy as np

from relight import synth
from relight.frameio import Sequence
from relight.metrics import mabd, psnr, report, ssim, warp_error, write_report

out_dir = Path(__file__).parent / "out" / "05"
out_dir.mkdir(parents=True, exist_ok=True)

img = synth.make_image(72, 72, seed=601, channels=1)
rng = np.random.default_rng(602)

print("fidelity anchors:")
print(f"  psnr(x, x)          {psnr(img, img):6.1f}  (capped)")
print(f"  psnr(x, x + 0.1)    {psnr(np.zeros_like(img), np.full_like(img, 0.1)):6.1f}")
noisy = np.clip(img + 0.05 * rng.standard_normal(img.shape), 0, 1)
print(f"  psnr, sigma 0.05    {psnr(img, noisy):6.1f}")
print(f"  ssim(x, x)          {ssim(img, img):6.3f}")
print(f"  ssim, sigma 0.05    {ssim(img, noisy):6.3f}")
ramp = np.tile(np.linspace(0.1, 0.9, 72), (72, 1))
print(f"  ssim(ramp, 1-ramp)  {ssim(ramp, 1.0 - ramp):6.3f}  (structure inverted)")

# three clips with the same per-frame content quality but different stability
steady = Sequence(frames=[img.copy() for _ in range(6)])
flicker = Sequence(frames=[np.clip(img + (0.04 if t % 2 else -0.04), 0, 1) for t in range(6)])
jittery = Sequence(frames=[np.clip(img + 0.04 * rng.standard_normal(img.shape), 0, 1) for t in range(6)])

print("\ntemporal stability (lower is better):")
for name, seq in (("steady", steady), ("brightness flicker", flicker), ("iid noise", jittery)):
    print(f"  {name:18s} warp {warp_error(seq):7.4f}   mabd {mabd(seq):7.4f}")

# a full report against a reference, serialized the same way the CLI does it
degraded = Sequence(frames=[np.clip(f + 0.03 * rng.standard_normal(f.shape), 0, 1) for f in steady.frames])
rep = report(degraded, steady)
write_report(rep, out_dir / "report.csv")
print(f"\nmean psnr {rep.mean_psnr:.2f}, mean ssim {rep.mean_ssim:.3f}, "
      f"warp {rep.warp:.4f}, mabd {rep.mabd:.4f}")
print(f"report written to {out_dir / 'report.csv'}")
