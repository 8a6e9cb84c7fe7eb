"""How the demixing octave pair (J1, J2) affects the estimates for four mixed fBm paths.

Run: python demos/02_choice_of_scales.py [replications]
"""
import sys

from wavemix import ExperimentConfig, mc_run

R = int(sys.argv[1]) if len(sys.argv) > 1 else 100
hs = (0.2, 0.4, 0.6, 0.8)

print(f"nu = 1024, R = {R}, four fBm sources mixed by P4\n")
print("(J1,J2)   " + "".join(f"   h={h}: mean   sd " for h in hs))
for J in [(1, 2), (1, 3), (1, 6)]:
    rep = mc_run(ExperimentConfig(classes=[f"fbm:{h}" for h in hs], nu=1024, replications=R,
                                  P="P4", J1=J[0], J2=J[1], seed=1, threads=4))
    cells = "".join(f"        {rep.summary(f'h{i + 1}').mean:.3f} {rep.summary(f'h{i + 1}').sd:.3f}"
                    for i in range(4))
    print(f"{J!s:9s}{cells}")

print("\nThe smallest exponent is the hardest: the fine octaves of a sampled fBm path")
print("are not yet in the scaling regime, and a wide octave pair makes the estimate")
print("of h = 0.2 drift downward at this sample size.")
