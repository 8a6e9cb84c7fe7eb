"""The exploratory pipeline on a bivariate record written to CSV.

No field data ship with the package, so this writes a synthetic stand-in
(two persistent noises, 6000 samples) and runs the same steps the
``wavemix analyze`` command performs.

Run: python demos/04_field_record.py [out_dir]
"""
import sys
import tempfile
from pathlib import Path

from wavemix import io, synth
from wavemix.cli import main

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="wavemix_"))
Y = synth.mix(synth.MIXING_P2, synth.synth_hidden(
    [synth.ProcessClass.fgn(0.65), synth.ProcessClass.fgn(0.93)], 6000, seed=42))
Y.labels = ["site_a", "site_b"]
csv = out / "record.csv"
io.write_csv(csv, Y)
print(f"wrote {csv}\n")

main(["analyze", str(csv), "--ranges", "3-7,3-9", "--out", str(out / "analysis")])

print(f"\nplot-ready tables in {out / 'analysis'}:")
for p in sorted((out / "analysis").iterdir()):
    print("  ", p.name)
print("\nscaling_*.csv holds (j, log2 W_ii, channel); coherence_*.csv holds (j, coherence)")
print("before and after demixing. The estimates barely move between the two octave ranges,")
print("and the equal-exponent test rejects because the gap is many standard errors wide.")
