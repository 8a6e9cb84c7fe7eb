"""Two hidden fractional noises, one strongly persistent, seen only through a mixing matrix.

Run: python demos/01_demix_and_estimate.py
"""
import numpy as np

from wavemix import DemixConfig, synth, two_step
from wavemix import dwt

nu = 2 ** 12
hidden = [synth.ProcessClass.fgn(0.3), synth.ProcessClass.fgn(0.9)]
X = synth.synth_hidden(hidden, nu, seed=11)
Y = synth.mix(synth.MIXING_P2, X)

print("Observed channels are sums of both sources, so their wavelet coherence is far from 0:")
basis = dwt.daubechies_filters(2)
ws_y = dwt.wavelet_variance(dwt.pyramid(Y, 8, basis))
for j, c in zip(ws_y.octaves, dwt.coherence(ws_y)):
    print(f"  octave {j}: {c:+.3f}")

res = two_step(Y, DemixConfig(1, 6))
print("\nDemixing with the wavelet variances at octaves 1 and 6 recovers the mixing columns")
print("(unit-norm, nonnegative diagonal):")
P_true = synth.MIXING_P2 / np.linalg.norm(synth.MIXING_P2, axis=0)
print("  estimated:", np.round(res.P_hat, 3).tolist())
print("  truth    :", np.round(P_true, 3).tolist())

ws_x = dwt.wavelet_variance(dwt.pyramid(res.demixed, 8, basis))
print("\nCoherence after demixing (null band is about +/- 1.96/sqrt(K_j)):")
for j, c in zip(ws_x.octaves, dwt.coherence(ws_x)):
    print(f"  octave {j}: {c:+.3f}   band {1.96 / np.sqrt(ws_x.counts[j]):.3f}")
print("Octaves 1 and 6 are decorrelated exactly by construction. Elsewhere the residual")
print("coherence comes from the error in P_hat, which the pointwise band does not include.")

print(f"\nRegression over octaves {res.octave_range[0]}..{res.octave_range[-1]}:")
for i, (h, hw) in enumerate(zip(res.h_hat, res.ci_halfwidth)):
    print(f"  source {i + 1}: h_hat = {h:.3f} +/- {hw:.3f}  (truth {hidden[i].h})")
print("The interval ignores the demixing error, so it is flagged approximate.")
